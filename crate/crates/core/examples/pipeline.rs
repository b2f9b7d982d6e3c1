//! End-to-end run on a synthetic city: ingest, before/after tests, STL,
//! change-points on the trend slope and segmented regression.
//!
//! Run with `cargo run --release --example pipeline [seed]`. The command-line
//! equivalent is `trendlens synthesize` followed by `trendlens report-all`.

use std::path::Path;

use trendlens::changepoint::{detect, MosumConfig};
use trendlens::inference::{welch_test, Tail, WelchSummary};
use trendlens::ingest::{aggregate_monthly, ingest, CategoryMap, ClassFilter, DateRange, Schema};
use trendlens::segreg::{breakpoint_months, fit_segmented, SegregConfig};
use trendlens::series::{slope, split, summarize, EpochSplit};
use trendlens::stl::{stl_decompose, StlConfig};
use trendlens::synthetic::{SyntheticCity, KINKS, START};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1);
    let map = CategoryMap::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("config/category_map.txt"))?;
    let window = DateRange::study_period();
    let mut csv = Vec::new();
    SyntheticCity::with_seed(seed).write_csv(&mut csv)?;
    let data = ingest(csv.as_slice(), &Schema::default(), &map, &window)?;
    println!("accepted {} of {} rows", data.report.accepted, data.report.rows_read);
    println!("planted kinks: {}, {}", START.add_months(KINKS[0] as i64), START.add_months(KINKS[1] as i64));

    for filter in [ClassFilter::Reclassified, ClassFilter::NonReclassified] {
        let name = filter.as_str();
        let series = aggregate_monthly(data.accepted(), filter, window.months(), name)?;

        let parts = split(&series, &EpochSplit::new(vec![EpochSplit::policy_cut()]))?;
        let before = WelchSummary::try_from(summarize(parts[0].values())?)?;
        let after = WelchSummary::try_from(summarize(parts[1].values())?)?;
        let w = welch_test(&before, &after, 0.05, Tail::observed(&before, &after))?;
        println!("{name}: {:.1} -> {:.1} per month, t {:.2} vs {:.2}, significant {}", before.mean, after.mean, w.t_statistic, w.critical, w.significant);

        let stl = StlConfig::monthly().with_trend_window(19);
        let trend = stl_decompose(&series, &stl)?.trend;
        let cps = detect(&slope(&trend)?, &MosumConfig { seed, ..MosumConfig::default() })?;
        let months: Vec<String> = cps.change_points.iter().map(|c| c.month.to_string()).collect();
        println!("  trend slope change-points: [{}]", months.join(", "));

        for (target, s) in [("observed", &series), ("trend", &trend)] {
            let fit = fit_segmented(s, &SegregConfig { seed, ..SegregConfig::new(2) })?;
            let bps: Vec<String> = breakpoint_months(&fit, s.start)
                .iter()
                .map(|b| format!("{} ({} to {})", b.month, b.ci_months.0, b.ci_months.1))
                .collect();
            println!("  {target} breakpoints: {}", bps.join(", "));
        }
    }
    Ok(())
}
