//! Grid search over breakpoint positions at observed timestamps.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{validate_xy, SegmentedFit, SegregError};
use crate::series::MonthlySeries;

pub const MAX_GRID_CANDIDATES: u128 = 1_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Continuous piecewise-linear least squares at fixed breakpoints through the
/// normal equations. Returns coefficients and rss.
fn fixed_fit(ts: &[f64], ys: &[f64], psi: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = 2 + psi.len();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for (&t, &y) in ts.iter().zip(ys) {
        row[0] = 1.0;
        row[1] = t;
        for (j, &b) in psi.iter().enumerate() {
            row[2 + j] = (t - b).max(0.0);
        }
        for a in 0..p {
            xty[a] += row[a] * y;
            for b in 0..p {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    let beta = Cholesky::new(xtx)?.solve(&xty);
    let rss = ts
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let f = beta[0] + beta[1] * t + psi.iter().enumerate().map(|(j, &b)| beta[2 + j] * (t - b).max(0.0)).sum::<f64>();
            (y - f) * (y - f)
        })
        .sum();
    Some((beta.iter().copied().collect(), rss))
}

/// Exact rss minimizer with every breakpoint at an interior timestamp
/// (never the first two or last two), for one or two breakpoints.
/// Standard errors are not computed and are reported as NaN.
pub fn fit_segmented_exhaustive_xy(ts: &[f64], ys: &[f64], n_breakpoints: usize) -> Result<SegmentedFit, SegregError> {
    if n_breakpoints > 2 {
        return Err(SegregError::ExhaustiveTooManyBreakpoints(n_breakpoints));
    }
    validate_xy(ts, ys, n_breakpoints)?;
    let n = ts.len();
    let grid: Vec<usize> = (2..n - 2).collect();
    let candidates = binomial(grid.len() as u128, n_breakpoints as u128);
    if candidates > MAX_GRID_CANDIDATES {
        return Err(SegregError::GridTooLarge(candidates));
    }

    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut consider = |psi: Vec<f64>| {
        if let Some((beta, rss)) = fixed_fit(ts, ys, &psi) {
            if best.as_ref().is_none_or(|b| rss < b.2) {
                best = Some((psi, beta, rss));
            }
        }
    };
    if n_breakpoints == 1 {
        for &i in &grid {
            consider(vec![ts[i]]);
        }
    } else {
        for (a, &i) in grid.iter().enumerate() {
            for &j in &grid[a + 1..] {
                consider(vec![ts[i], ts[j]]);
            }
        }
    }
    let (psi, beta, rss) = best.ok_or(SegregError::NoStableConfiguration)?;
    Ok(SegmentedFit {
        intercept: beta[0],
        slope: beta[1],
        deltas: beta[2..].to_vec(),
        breakpoints: psi
            .iter()
            .map(|&p| super::Breakpoint {
                position: p,
                se: f64::NAN,
                ci: (f64::NAN, f64::NAN),
            })
            .collect(),
        rss,
        dof: n - 2 - 2 * n_breakpoints,
        converged: true,
        iterations: 0,
    })
}

pub fn fit_segmented_exhaustive(series: &MonthlySeries, n_breakpoints: usize) -> Result<SegmentedFit, SegregError> {
    let ts: Vec<f64> = (0..series.len()).map(|i| i as f64).collect();
    fit_segmented_exhaustive_xy(&ts, series.values(), n_breakpoints)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_counts() {
        assert_eq!(binomial(164, 2), 13_366);
        assert_eq!(binomial(10, 0), 1);
        let ts: Vec<f64> = (0..1500).map(f64::from).collect();
        let ys = vec![0.0; 1500];
        assert!(matches!(fit_segmented_exhaustive_xy(&ts, &ys, 2), Err(SegregError::GridTooLarge(_))));
        assert!(matches!(fit_segmented_exhaustive_xy(&ts, &ys, 3), Err(SegregError::ExhaustiveTooManyBreakpoints(3))));
    }

    #[test]
    fn finds_grid_kinks() {
        let ts: Vec<f64> = (0..60).map(f64::from).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| t - 3.0 * (t - 20.0).max(0.0) + 4.0 * (t - 41.0).max(0.0)).collect();
        let fit = fit_segmented_exhaustive_xy(&ts, &ys, 2).unwrap();
        assert_eq!(fit.positions(), vec![20.0, 41.0]);
        assert!(fit.rss < 1e-18);
    }
}
