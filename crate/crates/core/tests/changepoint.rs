use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use trendlens::changepoint::*;
use trendlens::series::{slope, MonthlySeries, YearMonth};

fn gaussian(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Independent recomputation of the two-window statistic with the
/// sum-of-squares variance formula.
fn oracle_trace(x: &[f64], g: usize) -> Vec<Option<f64>> {
    let n = x.len();
    let stats = |w: &[f64]| {
        let m = w.iter().sum::<f64>() / g as f64;
        let ss: f64 = w.iter().map(|v| v * v).sum();
        (m, (ss - g as f64 * m * m) / (g as f64 - 1.0))
    };
    (0..n)
        .map(|t| {
            if t < g || t + g >= n {
                return None;
            }
            let (a, va) = stats(&x[t - g..t]);
            let (b, vb) = stats(&x[t..t + g]);
            let pooled = ((va + vb) / 2.0).sqrt();
            Some((b - a).abs() / pooled / (2.0 / g as f64).sqrt())
        })
        .collect()
}

#[test]
fn trace_matches_two_window_oracle() {
    let mut x = gaussian(3, 168);
    for v in &mut x[90..] {
        *v += 2.0;
    }
    let got = mosum_statistic(&x, 10, VarianceRule::Average).unwrap();
    let want = oracle_trace(&x, 10);
    assert_eq!(got.iter().filter(|v| v.is_none()).count(), 20);
    for (t, (a, b)) in got.iter().zip(&want).enumerate() {
        match (a, b) {
            (None, None) => {}
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-10, "t={t}: {a} vs {b}"),
            _ => panic!("definedness differs at {t}"),
        }
    }
}

#[test]
fn variance_rules_order() {
    let x = gaussian(4, 80);
    let avg = mosum_statistic(&x, 8, VarianceRule::Average).unwrap();
    let min = mosum_statistic(&x, 8, VarianceRule::Min).unwrap();
    let max = mosum_statistic(&x, 8, VarianceRule::Max).unwrap();
    for t in 8..72 {
        let (a, lo, hi) = (avg[t].unwrap(), min[t].unwrap(), max[t].unwrap());
        assert!(hi <= a + 1e-12 && a <= lo + 1e-12);
    }
}

#[test]
fn threshold_controls_null_exceedance() {
    // 1e5 Gaussian null series: how often does the maximum cross the threshold?
    let d = mosum_threshold(168, 10, 0.05).unwrap();
    let chunks = 100u64;
    let per_chunk = 1000;
    let exceed: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(1_000 + c);
            (0..per_chunk)
                .filter(|_| {
                    let x: Vec<f64> = (0..168).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let trace = mosum_statistic(&x, 10, VarianceRule::Average).unwrap();
                    trace.iter().flatten().any(|&v| v > d)
                })
                .count()
        })
        .sum();
    let rate = exceed as f64 / (chunks as usize * per_chunk) as f64;
    assert!((0.02..=0.10).contains(&rate), "null exceedance {rate}");
}

#[test]
fn noiseless_step_is_found_exactly() {
    let x: Vec<f64> = (0..120).map(|i| if i < 70 { 5.0 } else { 1.0 }).collect();
    let cfg = MosumConfig { bootstrap_replicates: 200, seed: 5, ..MosumConfig::default() };
    let report = detect_values(&x, YearMonth::new(2006, 1), &cfg).unwrap();
    assert_eq!(report.indices(), vec![70]);
    let cp = &report.change_points[0];
    assert!(cp.interval.contains(70));
    assert_eq!(cp.month, YearMonth::new(2011, 11));
}

#[test]
fn two_separated_shifts_with_small_eta() {
    let mut x = gaussian(8, 168);
    for (i, v) in x.iter_mut().enumerate() {
        if (50..110).contains(&i) {
            *v += 4.0;
        }
    }
    let cfg = MosumConfig { eta: 0.4, epsilon: 0.1, bootstrap_replicates: 300, seed: 2, ..MosumConfig::default() };
    let report = detect_values(&x, YearMonth::new(2006, 1), &cfg).unwrap();
    let idx = report.indices();
    assert_eq!(idx.len(), 2, "{idx:?}");
    assert!(idx[0].abs_diff(50) <= 2 && idx[1].abs_diff(110) <= 2);
    for cp in &report.change_points {
        assert!(cp.interval.contains(cp.index));
        assert!(cp.interval.hi - cp.interval.lo <= 20);
    }
    // the default separation of 12 bandwidths keeps only the stronger one
    let single = detect_values(&x, YearMonth::new(2006, 1), &MosumConfig { eta: 12.0, ..cfg }).unwrap();
    assert_eq!(single.change_points.len(), 1);
}

#[test]
fn seeded_report_is_reproducible() {
    let mut x = gaussian(21, 168);
    for v in &mut x[100..] {
        *v -= 2.5;
    }
    let cfg = MosumConfig { eta: 0.4, epsilon: 0.1, seed: 77, ..MosumConfig::default() };
    let a = detect_values(&x, YearMonth::new(2006, 1), &cfg).unwrap();
    let b = detect_values(&x, YearMonth::new(2006, 1), &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(!a.change_points.is_empty());
}

#[test]
fn detect_on_slope_series_reports_months() {
    // cumulative sum of a shifted series: its slope is the shifted series itself
    let mut inc = gaussian(30, 168);
    for v in &mut inc[96..] {
        *v += 3.0;
    }
    let mut acc = 0.0;
    let cum: Vec<f64> = inc
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    let series = MonthlySeries::new("c", YearMonth::new(2006, 1), cum).unwrap();
    let s = slope(&series).unwrap();
    let cfg = MosumConfig { eta: 0.4, epsilon: 0.1, bootstrap_replicates: 100, ..MosumConfig::default() };
    let report = detect(&s, &cfg).unwrap();
    assert_eq!(report.start, YearMonth::new(2006, 2));
    let months = report.months();
    assert!(months.iter().any(|m| m.months_until(YearMonth::new(2014, 1)).abs() <= 2), "{months:?}");
    let json = serde_json::to_value(&report).unwrap();
    assert!(json["trace"][0].is_null());
    assert!(json["change_points"][0]["month"].is_string());
}

#[test]
fn too_short_is_an_error() {
    assert_eq!(
        mosum_statistic(&[1.0; 20], 10, VarianceRule::Average),
        Err(ChangePointError::TooShort { len: 20, bandwidth: 10 })
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_location_and_scale_invariant(seed in 0u64..10_000, shift in -1e3f64..1e3, scale in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        let x = gaussian(seed, 60);
        let base = mosum_statistic(&x, 6, VarianceRule::Average).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
        let other = mosum_statistic(&moved, 6, VarianceRule::Average).unwrap();
        for (a, b) in base.iter().zip(&other) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-6 * a.max(1.0)),
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
    }

    #[test]
    fn selected_points_are_separated_and_inside_intervals(seed in 0u64..5_000, eta in 0.2f64..3.0) {
        let mut x = gaussian(seed, 150);
        for (i, v) in x.iter_mut().enumerate() {
            *v += [0.0, 3.0, -1.0][i / 50];
        }
        let cfg = MosumConfig { eta, epsilon: 0.1, bandwidth: 8, bootstrap_replicates: 40, seed, ..MosumConfig::default() };
        let report = detect_values(&x, YearMonth::new(2006, 1), &cfg).unwrap();
        let idx = report.indices();
        for w in idx.windows(2) {
            prop_assert!((w[1] - w[0]) as f64 >= eta * 8.0);
        }
        for cp in &report.change_points {
            prop_assert!(cp.interval.contains(cp.index));
            prop_assert!(cp.statistic > report.threshold);
        }
    }
}
