use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trendlens::segreg::*;
use trendlens::series::{MonthlySeries, YearMonth};

fn months(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

/// Two kinks on the month grid plus Gaussian noise.
fn two_kink_fixture(seed: u64) -> (Vec<f64>, Vec<f64>, [f64; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p1 = rng.gen_range(35..80) as f64;
    let p2 = rng.gen_range(100..140) as f64;
    let sign = |r: &mut ChaCha8Rng| if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    let d1 = sign(&mut rng) * rng.gen_range(0.8..2.5);
    let d2 = sign(&mut rng) * rng.gen_range(0.8..2.5);
    let noise = Normal::new(0.0, rng.gen_range(2.0..8.0)).unwrap();
    let ts = months(168);
    let ys = ts
        .iter()
        .map(|&t| 300.0 - 0.5 * t + d1 * (t - p1).max(0.0) + d2 * (t - p2).max(0.0) + noise.sample(&mut rng))
        .collect();
    (ts, ys, [p1, p2])
}

#[test]
fn iterative_rss_is_within_oracle_bound() {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (ts, ys, _) = two_kink_fixture(seed);
        let it = fit_segmented_xy(&ts, &ys, &SegregConfig { seed, ..SegregConfig::new(2) }).unwrap();
        let ex = fit_segmented_exhaustive_xy(&ts, &ys, 2).unwrap();
        let ratio = it.rss / ex.rss;
        worst = worst.max(ratio);
        assert!(ratio <= 1.001, "seed {seed}: {} vs {}", it.rss, ex.rss);
    }
    println!("worst rss ratio {worst}");
}

#[test]
fn noiseless_two_piece_recovers_kink() {
    let ts = months(101);
    let ys: Vec<f64> = ts.iter().map(|&t| if t <= 50.0 { t } else { 100.0 - t }).collect();
    let fit = fit_segmented_xy(&ts, &ys, &SegregConfig::new(1)).unwrap();
    assert!((fit.breakpoints[0].position - 50.0).abs() < 1e-6);
    assert!(fit.rss <= 1e-18, "rss {}", fit.rss);
    let ex = fit_segmented_exhaustive_xy(&ts, &ys, 1).unwrap();
    assert_eq!(ex.positions(), vec![50.0]);
}

#[test]
fn noiseless_two_kinks_are_stable() {
    let ts = months(168);
    let ys: Vec<f64> = ts.iter().map(|&t| 5.0 + 2.0 * t - 3.0 * (t - 60.0).max(0.0) + 2.5 * (t - 120.0).max(0.0)).collect();
    let fit = fit_segmented_xy(&ts, &ys, &SegregConfig::new(2)).unwrap();
    assert!((fit.breakpoints[0].position - 60.0).abs() < 1e-6 && (fit.breakpoints[1].position - 120.0).abs() < 1e-6);
    let probe = stability_probe_xy(&ts, &ys, &SegregConfig::new(2), 20).unwrap();
    assert_eq!(probe.failed_runs, 0);
    assert!(probe.spread.iter().all(|s| *s < 1e-6), "{:?}", probe.spread);
    assert!(!probe.unstable);
}

#[test]
fn white_noise_is_flagged_unstable() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noise = Normal::new(100.0, 10.0).unwrap();
    let ys: Vec<f64> = (0..168).map(|_| noise.sample(&mut rng)).collect();
    let probe = stability_probe_xy(&months(168), &ys, &SegregConfig { seed: 4, ..SegregConfig::new(2) }, 20).unwrap();
    assert!(probe.unstable, "{:?}", probe.spread);
}

#[test]
fn confidence_intervals_cover_true_kinks_usually() {
    let mut covered = 0;
    let mut total = 0;
    for seed in 100..140 {
        let (ts, ys, truth) = two_kink_fixture(seed);
        let fit = fit_segmented_xy(&ts, &ys, &SegregConfig::new(2)).unwrap();
        for (b, p) in fit.breakpoints.iter().zip(truth) {
            total += 1;
            if b.ci.0 <= p && p <= b.ci.1 {
                covered += 1;
            }
            assert!(b.se > 0.0 && b.ci.0 < b.position && b.position < b.ci.1);
        }
    }
    // nominal 95%; the delta method is only asymptotic
    assert!(covered as f64 / total as f64 > 0.8, "{covered}/{total}");
}

#[test]
fn monthly_wrapper_reports_months() {
    let ys: Vec<f64> = (0..168).map(|t| 400.0 - (t as f64) + 2.0 * (t as f64 - 106.0).max(0.0)).collect();
    let series = MonthlySeries::new("y", YearMonth::new(2006, 1), ys).unwrap();
    let fit = fit_segmented(&series, &SegregConfig::new(1)).unwrap();
    let bp = breakpoint_months(&fit, series.start);
    assert_eq!(bp[0].month, YearMonth::new(2014, 11));
    let json = serde_json::to_value(&fit).unwrap();
    assert_eq!(json["breakpoints"].as_array().unwrap().len(), 1);
}

#[test]
fn fit_is_continuous_and_reproducible() {
    let (ts, ys, _) = two_kink_fixture(7);
    let cfg = SegregConfig { seed: 3, ..SegregConfig::new(2) };
    let a = fit_segmented_xy(&ts, &ys, &cfg).unwrap();
    let b = fit_segmented_xy(&ts, &ys, &cfg).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    for bp in &a.breakpoints {
        let (l, r) = (a.predict(bp.position - 1e-9), a.predict(bp.position + 1e-9));
        assert!((l - r).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shifting_time_shifts_breakpoints(seed in 0u64..1000, shift in -5000.0f64..5000.0) {
        let (ts, ys, _) = two_kink_fixture(seed);
        let cfg = SegregConfig { seed, ..SegregConfig::new(2) };
        let base = fit_segmented_xy(&ts, &ys, &cfg).unwrap();
        let moved_ts: Vec<f64> = ts.iter().map(|t| t + shift).collect();
        let moved = fit_segmented_xy(&moved_ts, &ys, &cfg).unwrap();
        for (a, b) in base.breakpoints.iter().zip(&moved.breakpoints) {
            prop_assert!((b.position - a.position - shift).abs() < 1e-6);
            prop_assert!((b.se - a.se).abs() < 1e-6 * a.se.max(1.0));
        }
        prop_assert!((moved.rss - base.rss).abs() <= 1e-9 * base.rss);
        for (x, y) in base.deltas.iter().zip(&moved.deltas) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
