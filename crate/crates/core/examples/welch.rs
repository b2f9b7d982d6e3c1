//! One-sided Welch comparison of two epochs of monthly counts.
//!
//! Run with `cargo run --example welch`.

use trendlens::inference::{student_t_quantile, welch_test, Tail, WelchSummary};
use trendlens::series::{split, summarize, EpochSplit, MonthlySeries, YearMonth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a flat 290/month before November 2014, 320/month after, with a small wobble
    let start = YearMonth::new(2006, 1);
    let values: Vec<f64> = (0..168)
        .map(|i| {
            let base = if start.add_months(i) < YearMonth::new(2014, 11) { 290.0 } else { 320.0 };
            base + 9.0 * ((i as f64) * 0.7).sin()
        })
        .collect();
    let series = MonthlySeries::new("example", start, values)?;
    let parts = split(&series, &EpochSplit::new(vec![EpochSplit::policy_cut()]))?;

    let before = WelchSummary::try_from(summarize(parts[0].values())?)?;
    let after = WelchSummary::try_from(summarize(parts[1].values())?)?;
    let tail = Tail::observed(&before, &after);
    let r = welch_test(&before, &after, 0.05, tail)?;

    println!("before: mean {:.2} sd {:.2} n {}", before.mean, before.sd, before.n);
    println!("after:  mean {:.2} sd {:.2} n {}", after.mean, after.sd, after.n);
    println!("tail {:?}  t {:.2}  dof {:.1}  t_crit {:.3}", r.tail, r.t_statistic, r.dof, r.critical);
    println!("significant: {}  change {:+.1}%", r.significant, r.percent_change.unwrap_or(f64::NAN));

    // the critical value comes from the Student t quantile
    for dof in [5.0, 30.0, 153.0] {
        println!("t_0.95 at {dof} dof = {:.5}", student_t_quantile(0.95, dof)?);
    }
    Ok(())
}
