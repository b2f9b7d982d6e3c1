//! Two-breakpoint segmented regression, checked against the exhaustive grid fit.
//!
//! Run with `cargo run --example segreg [seed]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trendlens::segreg::{breakpoint_months, fit_segmented, fit_segmented_exhaustive, stability_probe, SegregConfig};
use trendlens::series::{MonthlySeries, YearMonth};
use trendlens::synthetic::{expected_count, MONTHS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 15.0)?;
    let start = YearMonth::new(2006, 1);
    let values: Vec<f64> = (0..MONTHS).map(|t| expected_count(true, t) + noise.sample(&mut rng)).collect();
    let series = MonthlySeries::new("reclassified", start, values)?;

    let config = SegregConfig { seed, ..SegregConfig::new(2) };
    let fit = fit_segmented(&series, &config)?;
    let grid = fit_segmented_exhaustive(&series, 2)?;
    for b in breakpoint_months(&fit, start) {
        println!("breakpoint {} (95% CI {} to {}), position {:.2}", b.month, b.ci_months.0, b.ci_months.1, b.position);
    }
    let slopes: Vec<String> = fit.segment_slopes().iter().map(|s| format!("{s:+.2}")).collect();
    println!("segment slopes {}", slopes.join(", "));
    println!("rss iterative {:.1}, grid {:.1}, ratio {:.5}", fit.rss, grid.rss, fit.rss / grid.rss);

    for k in [1, 2, 3] {
        let probe = stability_probe(&series, &SegregConfig { seed, ..SegregConfig::new(k) }, 20)?;
        let spread: Vec<String> = probe.spread.iter().map(|s| format!("{s:.1}")).collect();
        println!("{k} breakpoint(s): spread [{}] months, unstable {}", spread.join(", "), probe.unstable);
    }
    Ok(())
}
