//! Seasonal-trend decomposition of a synthetic monthly series, written as CSV.
//!
//! Run with `cargo run --example stl [trend_window]`.

use trendlens::series::{MonthlySeries, YearMonth};
use trendlens::stl::{stl_decompose, StlConfig};
use trendlens::synthetic::{expected_count, MONTHS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let w: Option<usize> = std::env::args().nth(1).map(|a| a.parse()).transpose()?;
    let values: Vec<f64> = (0..MONTHS).map(|t| expected_count(true, t)).collect();
    let series = MonthlySeries::new("reclassified", YearMonth::new(2006, 1), values)?;

    let mut config = StlConfig::monthly();
    if let Some(w) = w {
        config = config.with_trend_window(w);
    }
    let d = stl_decompose(&series, &config)?;

    let amplitude = d.seasonal.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = d.remainder.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    eprintln!("trend window {}, seasonal amplitude {amplitude:.2}, max |remainder| {worst:.2}", config.trend_window()?);
    d.write_csv(std::io::stdout().lock())?;
    Ok(())
}
