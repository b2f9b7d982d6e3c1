//! One-tailed Welch's unequal-variance t-test.
//!
//! All distribution code (log-gamma, incomplete beta, t quantile) lives in
//! the submodules and is self-contained.

pub mod special;
pub mod student_t;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::Summary;

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDof(f64),
    #[error("significance level must lie in (0, 0.5], got {0}")]
    InvalidAlpha(f64),
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("sample summary needs n >= 2 and sd >= 0 (n = {n}, sd = {sd})")]
    InvalidSummary { n: usize, sd: f64 },
    #[error("non-finite input")]
    NonFinite,
}

/// Mean, sample standard deviation and size of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl WelchSummary {
    pub fn new(mean: f64, sd: f64, n: usize) -> Result<Self, InferenceError> {
        if n < 2 || !(sd >= 0.0) {
            return Err(InferenceError::InvalidSummary { n, sd });
        }
        if !mean.is_finite() || !sd.is_finite() {
            return Err(InferenceError::NonFinite);
        }
        Ok(Self { mean, sd, n })
    }

    fn var_over_n(&self) -> f64 {
        self.sd * self.sd / self.n as f64
    }
}

impl TryFrom<Summary> for WelchSummary {
    type Error = InferenceError;

    fn try_from(s: Summary) -> Result<Self, Self::Error> {
        Self::new(s.mean, s.sd, s.n)
    }
}

/// Direction of the one-sided alternative, stated for the "after" epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// `mu_after > mu_before`
    Greater,
    /// `mu_after < mu_before`
    Less,
}

impl Tail {
    /// The alternative pointing in the direction the means actually moved.
    pub fn observed(before: &WelchSummary, after: &WelchSummary) -> Self {
        if after.mean >= before.mean {
            Tail::Greater
        } else {
            Tail::Less
        }
    }
}

/// `t = (mu_b - mu_a) / sqrt(sd_b^2/N_b + sd_a^2/N_a)`.
pub fn welch_t(before: &WelchSummary, after: &WelchSummary) -> Result<f64, InferenceError> {
    let se2 = before.var_over_n() + after.var_over_n();
    if se2 <= 0.0 {
        return Err(InferenceError::ZeroVariance);
    }
    Ok((before.mean - after.mean) / se2.sqrt())
}

/// Welch-Satterthwaite effective degrees of freedom (unrounded).
pub fn welch_satterthwaite_dof(
    before: &WelchSummary,
    after: &WelchSummary,
) -> Result<f64, InferenceError> {
    let vb = before.var_over_n();
    let va = after.var_over_n();
    if vb + va <= 0.0 {
        return Err(InferenceError::ZeroVariance);
    }
    let denom = vb * vb / (before.n as f64 - 1.0) + va * va / (after.n as f64 - 1.0);
    Ok((vb + va).powi(2) / denom)
}

pub fn student_t_quantile(p: f64, dof: f64) -> Result<f64, InferenceError> {
    student_t::quantile(p, dof)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub before: WelchSummary,
    pub after: WelchSummary,
    /// Statistic oriented so that positive values support the alternative.
    pub t_statistic: f64,
    pub dof: f64,
    /// One-sided critical value `t_s = quantile(1 - alpha, dof)`.
    pub critical: f64,
    pub alpha: f64,
    pub tail: Tail,
    pub significant: bool,
    /// `100 (mu_a - mu_b) / mu_b`; absent when `mu_b == 0`.
    pub percent_change: Option<f64>,
}

pub fn welch_test(
    before: &WelchSummary,
    after: &WelchSummary,
    alpha: f64,
    tail: Tail,
) -> Result<WelchResult, InferenceError> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(InferenceError::InvalidAlpha(alpha));
    }
    let t = welch_t(before, after)?;
    let dof = welch_satterthwaite_dof(before, after)?;
    let critical = student_t_quantile(1.0 - alpha, dof)?;
    let t_statistic = match tail {
        Tail::Greater => -t,
        Tail::Less => t,
    };
    let percent_change =
        (before.mean != 0.0).then(|| 100.0 * (after.mean - before.mean) / before.mean);
    Ok(WelchResult {
        before: *before,
        after: *after,
        t_statistic,
        dof,
        critical,
        alpha,
        tail,
        significant: t_statistic > critical,
        percent_change,
    })
}

impl WelchResult {
    /// Header matching [`WelchResult::csv_row`].
    pub const CSV_HEADER: [&'static str; 10] = [
        "mean_before",
        "sd_before",
        "n_before",
        "mean_after",
        "sd_after",
        "n_after",
        "t",
        "t_critical",
        "significant",
        "percent_change",
    ];

    /// Table row: before, after, t, t_s, significance, percent (1 decimal).
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            format!("{:.2}", self.before.mean),
            format!("{:.2}", self.before.sd),
            self.before.n.to_string(),
            format!("{:.2}", self.after.mean),
            format!("{:.2}", self.after.sd),
            self.after.n.to_string(),
            format!("{:.2}", self.t_statistic),
            format!("{:.2}", self.critical),
            if self.significant { "yes" } else { "no" }.to_string(),
            self.percent_change
                .map(|p| format!("{p:+.1}"))
                .unwrap_or_else(|| "N/A".to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(mean: f64, sd: f64, n: usize) -> WelchSummary {
        WelchSummary::new(mean, sd, n).unwrap()
    }

    #[test]
    fn citywide_reclassified_summaries() {
        let (b, a) = (s(281.4, 33.2, 106), s(322.9, 53.9, 62));
        let t = welch_t(&b, &a).unwrap();
        assert!((t.abs() - 5.5).abs() < 0.05, "t = {t}");
        assert!(t < 0.0);
        assert_eq!(welch_satterthwaite_dof(&b, &a).unwrap().round(), 89.0);
    }

    #[test]
    fn citywide_other_summaries() {
        let (b, a) = (s(387.3, 44.8, 106), s(337.1, 34.8, 62));
        assert!((welch_t(&b, &a).unwrap().abs() - 8.1).abs() < 0.05);
        assert_eq!(welch_satterthwaite_dof(&b, &a).unwrap().round(), 153.0);
    }

    #[test]
    fn identical_summaries_give_zero() {
        let b = s(10.0, 2.0, 30);
        assert_eq!(welch_t(&b, &b).unwrap(), 0.0);
        let r = welch_test(&b, &b, 0.05, Tail::Greater).unwrap();
        assert!(!r.significant);
        assert_eq!(r.percent_change, Some(0.0));
    }

    #[test]
    fn equal_variance_equal_n_dof() {
        let (b, a) = (s(1.0, 3.0, 25), s(7.0, 3.0, 25));
        assert!((welch_satterthwaite_dof(&b, &a).unwrap() - 48.0).abs() < 1e-10);
    }

    #[test]
    fn zero_variance_is_error() {
        let (b, a) = (s(1.0, 0.0, 5), s(2.0, 0.0, 5));
        assert_eq!(welch_t(&b, &a), Err(InferenceError::ZeroVariance));
        assert_eq!(welch_satterthwaite_dof(&b, &a), Err(InferenceError::ZeroVariance));
    }

    #[test]
    fn quantile_reference_value() {
        assert!((student_t_quantile(0.95, 89.0).unwrap() - 1.66).abs() < 0.005);
        // high-precision reference values
        assert!((student_t_quantile(0.95, 89.0).unwrap() - 1.662_155_325_8).abs() < 1e-8);
        assert!((student_t_quantile(0.95, 153.0).unwrap() - 1.654_873_846_8).abs() < 1e-8);
    }

    #[test]
    fn reclassified_test_is_significant_increase() {
        let r = welch_test(&s(281.4, 33.2, 106), &s(322.9, 53.9, 62), 0.05, Tail::Greater).unwrap();
        assert!(r.significant);
        assert!((r.percent_change.unwrap() - 14.7).abs() < 0.2);
        assert!(r.t_statistic > 0.0);
    }

    #[test]
    fn downtown_neighborhood_row() {
        let r = welch_test(&s(86.48, 14.59, 106), &s(118.69, 29.31, 62), 0.05, Tail::Greater).unwrap();
        assert!((r.t_statistic - 8.09).abs() < 0.05, "t = {}", r.t_statistic);
        assert!(r.significant);
        assert!((r.percent_change.unwrap() - 37.2).abs() < 0.2);
    }

    #[test]
    fn wrong_direction_is_not_significant() {
        let r = welch_test(&s(387.3, 44.8, 106), &s(337.1, 34.8, 62), 0.05, Tail::Greater).unwrap();
        assert!(!r.significant);
        let r = welch_test(&s(387.3, 44.8, 106), &s(337.1, 34.8, 62), 0.05, Tail::Less).unwrap();
        assert!(r.significant);
        assert!((r.percent_change.unwrap() + 13.0).abs() < 0.1);
    }

    #[test]
    fn alpha_is_validated() {
        let b = s(1.0, 1.0, 5);
        assert!(matches!(welch_test(&b, &b, 0.0, Tail::Less), Err(InferenceError::InvalidAlpha(_))));
        assert!(matches!(welch_test(&b, &b, 0.6, Tail::Less), Err(InferenceError::InvalidAlpha(_))));
    }

    #[test]
    fn summary_validation() {
        assert!(WelchSummary::new(1.0, 1.0, 1).is_err());
        assert!(WelchSummary::new(1.0, -1.0, 10).is_err());
        assert!(WelchSummary::new(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn csv_row_layout() {
        let r = welch_test(&s(76.51, 12.17, 125), &s(105.33, 18.84, 43), 0.05, Tail::Greater).unwrap();
        let row = r.csv_row();
        assert_eq!(row.len(), WelchResult::CSV_HEADER.len());
        assert_eq!(&row[..3], &["76.51", "12.17", "125"]);
        assert_eq!(row[8], "yes");
        assert_eq!(row[9], "+37.7");
    }

    fn summary_strategy() -> impl Strategy<Value = WelchSummary> {
        (-500.0f64..500.0, 0.1f64..100.0, 2usize..300).prop_map(|(m, sd, n)| s(m, sd, n))
    }

    proptest! {
        #[test]
        fn antisymmetric(a in summary_strategy(), b in summary_strategy()) {
            prop_assert_eq!(welch_t(&a, &b).unwrap(), -welch_t(&b, &a).unwrap());
        }

        #[test]
        fn scale_equivariant(a in summary_strategy(), b in summary_strategy(), k in 0.01f64..100.0) {
            let scale = |x: &WelchSummary| s(x.mean * k, x.sd * k, x.n);
            let r1 = welch_test(&a, &b, 0.05, Tail::Greater).unwrap();
            let r2 = welch_test(&scale(&a), &scale(&b), 0.05, Tail::Greater).unwrap();
            prop_assert!((r1.t_statistic - r2.t_statistic).abs() <= 1e-9 * r1.t_statistic.abs().max(1.0));
            prop_assert!((r1.dof - r2.dof).abs() <= 1e-9 * r1.dof);
            if (r1.t_statistic - r1.critical).abs() > 1e-6 {
                prop_assert_eq!(r1.significant, r2.significant);
            }
        }

        #[test]
        fn dof_bounds(a in summary_strategy(), b in summary_strategy()) {
            let dof = welch_satterthwaite_dof(&a, &b).unwrap();
            let lo = (a.n.min(b.n) - 1) as f64;
            let hi = (a.n + b.n - 2) as f64;
            prop_assert!(dof >= lo * (1.0 - 1e-12) && dof <= hi * (1.0 + 1e-12), "dof {} not in [{}, {}]", dof, lo, hi);
        }
    }
}
