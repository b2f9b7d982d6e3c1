//! MOSUM change-point detection on the month-to-month slope of an STL trend.
//!
//! Run with `cargo run --example changepoint`.

use trendlens::changepoint::{detect, MosumConfig};
use trendlens::series::{slope, MonthlySeries, YearMonth};
use trendlens::stl::{stl_decompose, StlConfig};
use trendlens::synthetic::{expected_count, KINKS, MONTHS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = YearMonth::new(2006, 1);
    let values: Vec<f64> = (0..MONTHS).map(|t| expected_count(true, t)).collect();
    let series = MonthlySeries::new("reclassified", start, values)?;
    let trend = stl_decompose(&series, &StlConfig::monthly().with_trend_window(19))?.trend;
    let m = slope(&trend)?;

    println!("true slope changes: {}, {}", start.add_months(KINKS[0] as i64), start.add_months(KINKS[1] as i64));
    for (label, config) in [
        ("G=10, eta=12", MosumConfig::default()),
        ("G=5, eta=5", MosumConfig { bandwidth: 5, eta: 5.0, ..MosumConfig::default() }),
    ] {
        let report = detect(&m, &config)?;
        println!("{label}: threshold {:.3}", report.threshold);
        for c in &report.change_points {
            println!("  {} (statistic {:.2}, 95% interval {} to {})", c.month, c.statistic, c.interval_months.0, c.interval_months.1);
        }
    }
    Ok(())
}
