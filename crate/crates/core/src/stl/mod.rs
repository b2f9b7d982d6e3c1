//! Seasonal-trend decomposition by loess.
//!
//! The additive split `Y = T + S + R` follows the classic inner/outer loop
//! structure: cycle-subseries smoothing, a low-pass filter that removes any
//! trend leaking into the seasonal, then a trend loess on the deseasonalized
//! series. The outer loop reweights points by a bisquare of the remainder.

mod loess;

pub use loess::{loess, tricube, Degree, Loess};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{MonthlySeries, SeriesError};

#[derive(Debug, Error)]
pub enum StlError {
    #[error("loess degree must be 0, 1 or 2, got {0}")]
    InvalidDegree(usize),
    #[error("abscissae, ordinates and weights must have equal length")]
    LengthMismatch,
    #[error("loess window has no positive weight")]
    EmptyWindow,
    #[error("loess span {span} too small for degree {degree}")]
    SpanTooSmall { span: usize, degree: usize },
    #[error("loess abscissae must be strictly increasing")]
    UnsortedAbscissae,
    #[error("{name} window must be odd and >= 3, got {value}")]
    InvalidWindow { name: &'static str, value: usize },
    #[error("period must be >= 2, got {0}")]
    InvalidPeriod(usize),
    #[error("series of length {len} is shorter than two periods of {period}")]
    TooShort { len: usize, period: usize },
    #[error("seasonal window {0} gives a nonpositive trend-window denominator")]
    SeasonalTooNarrow(usize),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Seasonal smoothing: a plain (weighted) subseries mean, or a loess span in cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeasonalWindow {
    Periodic,
    Span(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendWindow {
    Auto,
    Span(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlConfig {
    pub period: usize,
    pub seasonal: SeasonalWindow,
    pub trend: TrendWindow,
    /// Defaults to the smallest odd integer >= `period`.
    pub lowpass: Option<usize>,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

impl Default for StlConfig {
    fn default() -> Self {
        Self::monthly()
    }
}

impl StlConfig {
    /// Twelve-month period, periodic seasonal, automatic trend window.
    pub fn monthly() -> Self {
        Self {
            period: 12,
            seasonal: SeasonalWindow::Periodic,
            trend: TrendWindow::Auto,
            lowpass: None,
            inner_iterations: 2,
            outer_iterations: 0,
        }
    }

    pub fn with_trend_window(mut self, w: usize) -> Self {
        self.trend = TrendWindow::Span(w);
        self
    }

    pub fn trend_window(&self) -> Result<usize, StlError> {
        match self.trend {
            TrendWindow::Auto => auto_trend_window(self.period, self.seasonal),
            TrendWindow::Span(w) => Ok(w),
        }
    }

    pub fn lowpass_window(&self) -> usize {
        self.lowpass.unwrap_or_else(|| next_odd(self.period))
    }

    fn validate(&self) -> Result<(usize, usize), StlError> {
        if self.period < 2 {
            return Err(StlError::InvalidPeriod(self.period));
        }
        let check = |name, value: usize| {
            if value >= 3 && value % 2 == 1 {
                Ok(())
            } else {
                Err(StlError::InvalidWindow { name, value })
            }
        };
        if let SeasonalWindow::Span(s) = self.seasonal {
            check("seasonal", s)?;
        }
        let trend = self.trend_window()?;
        check("trend", trend)?;
        let lowpass = self.lowpass_window();
        check("lowpass", lowpass)?;
        Ok((trend, lowpass))
    }
}

fn next_odd(x: usize) -> usize {
    if x % 2 == 1 {
        x
    } else {
        x + 1
    }
}

/// Default trend window: the smallest odd integer at least
/// `1.5 n_p / (1 - 1.5 / s)`; a periodic seasonal counts as `s = inf`.
pub fn auto_trend_window(period: usize, seasonal: SeasonalWindow) -> Result<usize, StlError> {
    if period < 2 {
        return Err(StlError::InvalidPeriod(period));
    }
    let raw = match seasonal {
        SeasonalWindow::Periodic => (3 * period).div_ceil(2),
        SeasonalWindow::Span(s) => {
            // 1.5 p / (1 - 1.5/s) = 3 p s / (2 s - 3), kept in integers
            if 2 * s <= 3 {
                return Err(StlError::SeasonalTooNarrow(s));
            }
            (3 * period * s).div_ceil(2 * s - 3)
        }
    };
    Ok(next_odd(raw))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: MonthlySeries,
    pub seasonal: MonthlySeries,
    pub remainder: MonthlySeries,
    pub robustness_weights: Vec<f64>,
}

impl Decomposition {
    pub const CSV_HEADER: &'static str = "month,trend,seasonal,remainder";

    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        let (t, s, r) = (self.trend.values(), self.seasonal.values(), self.remainder.values());
        for i in 0..self.len() {
            writeln!(w, "{},{},{},{}", self.trend.month_at(i), t[i], s[i], r[i])?;
        }
        Ok(())
    }
}

pub fn stl_decompose(series: &MonthlySeries, config: &StlConfig) -> Result<Decomposition, StlError> {
    let (trend_window, lowpass_window) = config.validate()?;
    let np = config.period;
    let y = series.values();
    let n = y.len();
    if n < 2 * np {
        return Err(StlError::TooShort { len: n, period: np });
    }

    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut weights = vec![1.0; n];

    for outer in 0..=config.outer_iterations {
        let rw = (outer > 0).then_some(weights.as_slice());
        for _ in 0..config.inner_iterations {
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
            let cycle = smooth_subseries(&detrended, rw, np, config.seasonal)?;
            let low = lowpass(&cycle, np, lowpass_window, &xs)?;
            for i in 0..n {
                seasonal[i] = cycle[np + i] - low[i];
            }
            let deseasonal: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
            trend = Loess::new(&xs, &deseasonal, trend_window, Degree::Linear, rw)?.fit(&xs)?;
        }
        if outer < config.outer_iterations {
            let resid: Vec<f64> = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
            weights = bisquare_weights(&resid);
        }
    }

    let remainder: Vec<f64> = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
    let label = &series.label;
    Ok(Decomposition {
        trend: series.with_values(format!("{label} trend"), trend)?,
        seasonal: series.with_values(format!("{label} seasonal"), seasonal)?,
        remainder: series.with_values(format!("{label} remainder"), remainder)?,
        robustness_weights: weights,
    })
}

/// Smooths each cycle-subseries and extends it by one cycle on both sides.
/// Returns the reassembled series of length `n + 2 np`, indexed from time `-np`.
fn smooth_subseries(
    detrended: &[f64],
    rw: Option<&[f64]>,
    np: usize,
    window: SeasonalWindow,
) -> Result<Vec<f64>, StlError> {
    let n = detrended.len();
    let smoothed: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map(|j| {
            let idx: Vec<usize> = (j..n).step_by(np).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| detrended[i]).collect();
            // a subseries whose every point was rejected is smoothed unweighted
            let ws: Option<Vec<f64>> = rw
                .map(|w| idx.iter().map(|&i| w[i]).collect::<Vec<_>>())
                .filter(|w| w.iter().any(|&v| v > 0.0));
            let k = ys.len();
            match window {
                SeasonalWindow::Periodic => {
                    let (mut sw, mut swy) = (0.0, 0.0);
                    for (m, &v) in ys.iter().enumerate() {
                        let w = ws.as_ref().map_or(1.0, |w| w[m]);
                        sw += w;
                        swy += w * v;
                    }
                    Ok(vec![swy / sw; k + 2])
                }
                SeasonalWindow::Span(span) => {
                    let xs: Vec<f64> = (0..k).map(|m| m as f64).collect();
                    let at: Vec<f64> = (-1..=k as i64).map(|m| m as f64).collect();
                    Loess::new(&xs, &ys, span, Degree::Linear, ws.as_deref())?.fit(&at)
                }
            }
        })
        .collect::<Result<_, _>>()?;

    let mut cycle = vec![0.0; n + 2 * np];
    for (j, values) in smoothed.iter().enumerate() {
        for (m, &v) in values.iter().enumerate() {
            // position m of subseries j sits at time j + (m - 1) np
            cycle[j + m * np] = v;
        }
    }
    Ok(cycle)
}

/// Moving averages of lengths `np`, `np`, 3 followed by a degree-1 loess.
/// The input carries one extra cycle at each end, so the cascade lands on
/// exactly the original `n` time points.
fn lowpass(cycle: &[f64], np: usize, window: usize, xs: &[f64]) -> Result<Vec<f64>, StlError> {
    let a = moving_average(cycle, np);
    let b = moving_average(&a, np);
    let c = moving_average(&b, 3);
    debug_assert_eq!(c.len(), xs.len());
    Loess::new(xs, &c, window, Degree::Linear, None)?.fit(xs)
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    x.windows(len).map(|w| w.iter().sum::<f64>() / len as f64).collect()
}

/// Bisquare of residuals scaled by six times their median absolute value.
fn bisquare_weights(resid: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let m = abs.len();
    let median = if m % 2 == 1 {
        abs[m / 2]
    } else {
        0.5 * (abs[m / 2 - 1] + abs[m / 2])
    };
    let h = 6.0 * median;
    resid
        .iter()
        .map(|r| {
            let r = r.abs();
            if h == 0.0 {
                if r == 0.0 { 1.0 } else { 0.0 }
            } else if r < h {
                let u = r / h;
                let c = 1.0 - u * u;
                c * c
            } else {
                0.0
            }
        })
        .collect()
}
