//! MOSUM change-point detection for a single mean-shift process.
//!
//! The statistic at index `t` compares the mean of the `G` values before `t`
//! with the `G` values from `t` on, scaled by a pooled local standard
//! deviation. Candidates above the asymptotic threshold are pruned by the
//! ε (minimum exceedance width) and η (minimum separation) criteria.

mod bootstrap;

pub use bootstrap::{bootstrap_intervals, BootstrapInterval};

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::series::{SlopeSeries, YearMonth};

#[derive(Debug, Error, PartialEq)]
pub enum ChangePointError {
    #[error("series of length {len} needs more than 2G = {} points", 2 * bandwidth)]
    TooShort { len: usize, bandwidth: usize },
    #[error("bandwidth must be at least 1")]
    ZeroBandwidth,
    #[error("eta must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
}

/// How the prior and after window variances combine into `σ̂²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceRule {
    #[default]
    Average,
    Min,
    Max,
}

impl VarianceRule {
    fn combine(self, prior: f64, after: f64) -> f64 {
        match self {
            VarianceRule::Average => 0.5 * (prior + after),
            VarianceRule::Min => prior.min(after),
            VarianceRule::Max => prior.max(after),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosumConfig {
    pub bandwidth: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub variance_rule: VarianceRule,
    pub bootstrap_replicates: usize,
    pub seed: u64,
}

impl Default for MosumConfig {
    /// Ten-month bandwidth with a separation of 12 bandwidths, so a
    /// 14-year monthly slope series yields at most one change-point.
    fn default() -> Self {
        Self {
            bandwidth: 10,
            eta: 12.0,
            epsilon: 0.5,
            alpha: 0.05,
            variance_rule: VarianceRule::Average,
            bootstrap_replicates: 1000,
            seed: 0,
        }
    }
}

impl MosumConfig {
    pub fn validate(&self) -> Result<(), ChangePointError> {
        if self.bandwidth == 0 {
            return Err(ChangePointError::ZeroBandwidth);
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(ChangePointError::InvalidEta(self.eta));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(ChangePointError::InvalidEpsilon(self.epsilon));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ChangePointError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }

    /// Half-width of the centered window that must lie above the threshold:
    /// the smallest odd width `2h + 1 >= εG`.
    pub fn epsilon_half_width(&self) -> usize {
        let width = (self.epsilon * self.bandwidth as f64).ceil() as usize;
        width.saturating_sub(1).div_ceil(2)
    }

    /// Minimum index distance between accepted change-points.
    pub fn min_separation(&self) -> f64 {
        self.eta * self.bandwidth as f64
    }
}

fn mean_var(w: &[f64]) -> (f64, f64) {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let ss = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    let var = if w.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// MOSUM trace. Entry `t` is `None` for the first and last `G` indices;
/// otherwise it compares `x[t-G..t]` with `x[t..t+G]`.
///
/// A zero pooled variance yields `0` when the means agree and `+inf` otherwise.
pub fn mosum_statistic(
    x: &[f64],
    bandwidth: usize,
    rule: VarianceRule,
) -> Result<Vec<Option<f64>>, ChangePointError> {
    let n = x.len();
    let g = bandwidth;
    if g == 0 {
        return Err(ChangePointError::ZeroBandwidth);
    }
    if n <= 2 * g {
        return Err(ChangePointError::TooShort { len: n, bandwidth: g });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(ChangePointError::NonFinite(i));
    }
    let norm = (2.0 / g as f64).sqrt();
    let mut trace = vec![None; n];
    for (t, slot) in trace.iter_mut().enumerate().take(n - g).skip(g) {
        let (m0, v0) = mean_var(&x[t - g..t]);
        let (m1, v1) = mean_var(&x[t..t + g]);
        let diff = (m1 - m0).abs();
        let sigma = rule.combine(v0, v1).sqrt();
        *slot = Some(if sigma > 0.0 {
            diff / (sigma * norm)
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(trace)
}

/// Asymptotic critical value of the maximum MOSUM statistic at level `alpha`.
pub fn mosum_threshold(n: usize, bandwidth: usize, alpha: f64) -> Result<f64, ChangePointError> {
    if bandwidth == 0 {
        return Err(ChangePointError::ZeroBandwidth);
    }
    if n <= 2 * bandwidth {
        return Err(ChangePointError::TooShort { len: n, bandwidth });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ChangePointError::InvalidAlpha(alpha));
    }
    let ratio = n as f64 / bandwidth as f64;
    let a = (2.0 * ratio.ln()).sqrt();
    let b = 2.0 * ratio.ln()
        + 0.5 * ratio.max(std::f64::consts::E).ln().ln()
        + (3.0 / (2.0 * std::f64::consts::PI.sqrt())).ln();
    let c = -(-0.5 * (1.0 - alpha).ln()).ln();
    Ok((b + c) / a)
}

/// Change-point indices from a trace: local maxima above `threshold` whose
/// centered ε-window stays above it, thinned greedily by statistic so that
/// survivors are at least `ηG` apart. Returned in increasing order.
pub fn select_change_points(trace: &[Option<f64>], threshold: f64, config: &MosumConfig) -> Vec<usize> {
    let n = trace.len();
    let value = |i: usize| trace[i].unwrap_or(f64::NEG_INFINITY);
    let h = config.epsilon_half_width();

    let mut candidates: Vec<usize> = (0..n)
        .filter(|&t| {
            let v = value(t);
            v > threshold
                && (t == 0 || value(t - 1) <= v)
                && (t + 1 == n || value(t + 1) <= v)
                && t >= h
                && t + h < n
                && (t - h..=t + h).all(|i| value(i) > threshold)
        })
        .collect();
    candidates.sort_by(|&a, &b| value(b).total_cmp(&value(a)).then(a.cmp(&b)));

    let sep = config.min_separation();
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| (k.abs_diff(c) as f64) >= sep) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Trace value with `+inf` written as the string `"inf"` and undefined
/// entries as `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceValue(pub Option<f64>);

impl Serialize for TraceValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            None => s.serialize_none(),
            Some(v) if v.is_infinite() => s.serialize_str("inf"),
            Some(v) => s.serialize_f64(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangePoint {
    pub index: usize,
    pub month: YearMonth,
    #[serde(serialize_with = "ser_stat")]
    pub statistic: f64,
    pub interval: BootstrapInterval,
    pub interval_months: (YearMonth, YearMonth),
}

fn ser_stat<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    TraceValue(Some(*v)).serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangePointReport {
    pub start: YearMonth,
    pub config: MosumConfig,
    pub threshold: f64,
    pub trace: Vec<TraceValue>,
    pub change_points: Vec<ChangePoint>,
}

impl ChangePointReport {
    pub fn indices(&self) -> Vec<usize> {
        self.change_points.iter().map(|c| c.index).collect()
    }

    pub fn months(&self) -> Vec<YearMonth> {
        self.change_points.iter().map(|c| c.month).collect()
    }

    pub fn trace_values(&self) -> Vec<Option<f64>> {
        self.trace.iter().map(|t| t.0).collect()
    }
}

/// Runs the full detector on raw values: trace, threshold, selection, and
/// bootstrap intervals. Months are attached relative to `start`.
pub fn detect_values(x: &[f64], start: YearMonth, config: &MosumConfig) -> Result<ChangePointReport, ChangePointError> {
    config.validate()?;
    let trace = mosum_statistic(x, config.bandwidth, config.variance_rule)?;
    let threshold = mosum_threshold(x.len(), config.bandwidth, config.alpha)?;
    let points = select_change_points(&trace, threshold, config);
    let intervals = bootstrap_intervals(x, &points, config)?;
    let month = |i: usize| start.add_months(i as i64);
    let change_points = points
        .iter()
        .zip(intervals)
        .map(|(&index, interval)| ChangePoint {
            index,
            month: month(index),
            statistic: trace[index].expect("selected points have a defined statistic"),
            interval_months: (month(interval.lo), month(interval.hi)),
            interval,
        })
        .collect();
    Ok(ChangePointReport {
        start,
        config: config.clone(),
        threshold,
        trace: trace.into_iter().map(TraceValue).collect(),
        change_points,
    })
}

pub fn detect(series: &SlopeSeries, config: &MosumConfig) -> Result<ChangePointReport, ChangePointError> {
    detect_values(&series.values, series.start, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_trace() {
        let trace = mosum_statistic(&[3.5; 40], 5, VarianceRule::Average).unwrap();
        assert!(trace[..5].iter().all(Option::is_none));
        assert!(trace[35..].iter().all(Option::is_none));
        assert!(trace[5..35].iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn step_peaks_at_the_step() {
        let x: Vec<f64> = (0..60).map(|i| if i < 27 { 1.0 } else { 4.0 }).collect();
        let trace = mosum_statistic(&x, 10, VarianceRule::Average).unwrap();
        assert_eq!(trace[27], Some(f64::INFINITY));
        // one straddling point: statistic G - 1
        assert!((trace[26].unwrap() - 9.0).abs() < 1e-12);
        assert!((trace[28].unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_properties() {
        let d05 = mosum_threshold(168, 10, 0.05).unwrap();
        let d01 = mosum_threshold(168, 10, 0.01).unwrap();
        assert!(d01 > d05);
        assert!((d05 - 4.066).abs() < 5e-3, "{d05}");
        let mut last = 0.0;
        for n in [100, 1_000, 10_000, 100_000, 1_000_000] {
            let d = mosum_threshold(n, 10, 0.05).unwrap();
            assert!(d > last);
            last = d;
        }
        // ratio below e still finite thanks to the floor
        assert!(mosum_threshold(21, 10, 0.05).unwrap().is_finite());
        assert_eq!(mosum_threshold(20, 10, 0.05), Err(ChangePointError::TooShort { len: 20, bandwidth: 10 }));
    }

    #[test]
    fn epsilon_half_widths() {
        let cfg = |epsilon, bandwidth| MosumConfig { epsilon, bandwidth, ..MosumConfig::default() };
        assert_eq!(cfg(0.1, 10).epsilon_half_width(), 0);
        assert_eq!(cfg(0.2, 10).epsilon_half_width(), 1);
        assert_eq!(cfg(0.3, 10).epsilon_half_width(), 1);
        assert_eq!(cfg(0.5, 10).epsilon_half_width(), 2);
        assert_eq!(cfg(1.0, 10).epsilon_half_width(), 5);
        assert_eq!(cfg(0.5, 5).epsilon_half_width(), 1);
    }

    #[test]
    fn selection_respects_eta_and_epsilon() {
        let mut trace = vec![None; 40];
        for slot in trace.iter_mut().take(35).skip(5) {
            *slot = Some(1.0);
        }
        // two peaks 6 apart, the later one higher; a narrow spike
        for (i, v) in [(10, 5.0), (11, 6.0), (12, 5.0), (16, 5.0), (17, 7.0), (18, 5.0), (30, 9.0)] {
            trace[i] = Some(v);
        }
        let cfg = MosumConfig { bandwidth: 5, eta: 1.0, epsilon: 0.5, ..MosumConfig::default() };
        // h = 1: the isolated spike at 30 fails the width test
        assert_eq!(select_change_points(&trace, 4.0, &cfg), vec![11, 17]);
        let wide = MosumConfig { eta: 1.4, ..cfg.clone() };
        assert_eq!(select_change_points(&trace, 4.0, &wide), vec![17]);
        let narrow = MosumConfig { epsilon: 0.2, ..cfg };
        assert_eq!(select_change_points(&trace, 4.0, &narrow), vec![11, 17, 30]);
    }

    #[test]
    fn equal_peaks_keep_earliest() {
        let mut trace = vec![Some(0.0); 20];
        trace[6] = Some(5.0);
        trace[9] = Some(5.0);
        let cfg = MosumConfig { bandwidth: 2, eta: 2.0, epsilon: 0.1, ..MosumConfig::default() };
        assert_eq!(select_change_points(&trace, 1.0, &cfg), vec![6]);
    }

    #[test]
    fn config_validation() {
        let ok = MosumConfig::default();
        assert!(ok.validate().is_ok());
        assert!(MosumConfig { epsilon: 0.0, ..ok.clone() }.validate().is_err());
        assert!(MosumConfig { epsilon: 1.5, ..ok.clone() }.validate().is_err());
        assert!(MosumConfig { eta: -1.0, ..ok.clone() }.validate().is_err());
        assert!(MosumConfig { alpha: 1.0, ..ok.clone() }.validate().is_err());
        assert!(MosumConfig { bandwidth: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn trace_json_uses_null_and_inf() {
        let v = serde_json::to_string(&[TraceValue(None), TraceValue(Some(f64::INFINITY)), TraceValue(Some(1.5))]).unwrap();
        assert_eq!(v, r#"[null,"inf",1.5]"#);
    }
}
