//! Locally weighted polynomial regression with tricube neighborhood weights.

use serde::{Deserialize, Serialize};

use super::StlError;

/// Degree of the local polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Degree {
    Constant = 0,
    Linear = 1,
    Quadratic = 2,
}

impl Degree {
    pub fn as_usize(self) -> usize {
        self as usize
    }

    fn lower(self) -> Option<Degree> {
        match self {
            Degree::Constant => None,
            Degree::Linear => Some(Degree::Constant),
            Degree::Quadratic => Some(Degree::Linear),
        }
    }
}

impl TryFrom<usize> for Degree {
    type Error = StlError;

    fn try_from(d: usize) -> Result<Self, Self::Error> {
        match d {
            0 => Ok(Degree::Constant),
            1 => Ok(Degree::Linear),
            2 => Ok(Degree::Quadratic),
            _ => Err(StlError::InvalidDegree(d)),
        }
    }
}

/// Tricube kernel on `|u| < 1`.
#[inline]
pub fn tricube(u: f64) -> f64 {
    let u = u.abs();
    if u >= 1.0 {
        0.0
    } else {
        let c = 1.0 - u * u * u;
        c * c * c
    }
}

/// Smoother over a fixed set of strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct Loess<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    span: usize,
    degree: Degree,
    robustness: Option<&'a [f64]>,
}

impl<'a> Loess<'a> {
    pub fn new(
        xs: &'a [f64],
        ys: &'a [f64],
        span: usize,
        degree: Degree,
        robustness: Option<&'a [f64]>,
    ) -> Result<Self, StlError> {
        if xs.len() != ys.len() || robustness.is_some_and(|w| w.len() != xs.len()) {
            return Err(StlError::LengthMismatch);
        }
        if xs.is_empty() {
            return Err(StlError::EmptyWindow);
        }
        if span < degree.as_usize() + 1 {
            return Err(StlError::SpanTooSmall {
                span,
                degree: degree.as_usize(),
            });
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(StlError::UnsortedAbscissae);
        }
        Ok(Self {
            xs,
            ys,
            span,
            degree,
            robustness,
        })
    }

    /// Index range `[lo, hi)` of the `span` points nearest `q`.
    fn neighborhood(&self, q: f64) -> (usize, usize) {
        let n = self.xs.len();
        let k = self.span.min(n);
        let pos = self.xs.partition_point(|&x| x < q);
        let mut lo = pos.saturating_sub(k / 2).min(n - k);
        while lo + k < n && self.xs[lo + k] - q < q - self.xs[lo] {
            lo += 1;
        }
        while lo > 0 && q - self.xs[lo - 1] < self.xs[lo + k - 1] - q {
            lo -= 1;
        }
        (lo, lo + k)
    }

    /// Fitted value at `q`.
    pub fn fit_at(&self, q: f64) -> Result<f64, StlError> {
        let n = self.xs.len();
        let (lo, hi) = self.neighborhood(q);
        let mut h = (q - self.xs[lo]).max(self.xs[hi - 1] - q);
        if self.span > n {
            // widen as if the missing points sat half on each side
            h += ((self.span - n) / 2) as f64;
        }

        let mut weights = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let d = (self.xs[i] - q).abs();
            let kernel = if h > 0.0 {
                tricube(d / h)
            } else if d == 0.0 {
                1.0
            } else {
                0.0
            };
            let rw = self.robustness.map_or(1.0, |r| r[i]);
            weights.push(kernel * rw);
        }

        if weights.iter().sum::<f64>() > 0.0 {
            let scale = if h > 0.0 { h } else { 1.0 };
            let mut degree = self.degree;
            loop {
                if let Some(v) = local_fit(&self.xs[lo..hi], &self.ys[lo..hi], &weights, q, scale, degree) {
                    return Ok(v);
                }
                degree = degree.lower().expect("constant fit succeeds when weights are positive");
            }
        }

        // every neighbor got zero kernel weight: robustness-weighted mean of the window
        let (mut sw, mut swy) = (0.0, 0.0);
        for i in lo..hi {
            let rw = self.robustness.map_or(1.0, |r| r[i]);
            sw += rw;
            swy += rw * self.ys[i];
        }
        if sw > 0.0 {
            Ok(swy / sw)
        } else {
            Err(StlError::EmptyWindow)
        }
    }

    pub fn fit(&self, at: &[f64]) -> Result<Vec<f64>, StlError> {
        at.iter().map(|&q| self.fit_at(q)).collect()
    }
}

/// Weighted least-squares polynomial in `u = (x - q) / scale`, evaluated at
/// `u = 0`. `None` when the normal equations are numerically singular.
fn local_fit(xs: &[f64], ys: &[f64], w: &[f64], q: f64, scale: f64, degree: Degree) -> Option<f64> {
    let p = degree.as_usize() + 1;
    // moments[k] = Σ w u^k, rhs[k] = Σ w u^k y
    let mut moments = [0.0f64; 5];
    let mut rhs = [0.0f64; 3];
    for ((&x, &y), &wi) in xs.iter().zip(ys).zip(w) {
        if wi == 0.0 {
            continue;
        }
        let u = (x - q) / scale;
        let mut uk = 1.0;
        for k in 0..(2 * p - 1) {
            moments[k] += wi * uk;
            if k < p {
                rhs[k] += wi * uk * y;
            }
            uk *= u;
        }
    }
    if p == 1 {
        return (moments[0] > 0.0).then(|| rhs[0] / moments[0]);
    }

    let mut a = [[0.0f64; 4]; 3];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = moments[r + c];
        }
        a[r][p] = rhs[r];
    }
    let tol = 1e-10 * moments[0];
    // Gaussian elimination with partial pivoting
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() <= tol {
            return None;
        }
        a.swap(col, piv);
        for r in (col + 1)..p {
            let f = a[r][col] / a[col][col];
            for c in col..=p {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut beta = [0.0f64; 3];
    for r in (0..p).rev() {
        let mut acc = a[r][p];
        for c in (r + 1)..p {
            acc -= a[r][c] * beta[c];
        }
        beta[r] = acc / a[r][r];
    }
    beta[0].is_finite().then_some(beta[0])
}

/// One-shot loess fit of `(xs, ys)` evaluated at `at`.
pub fn loess(
    xs: &[f64],
    ys: &[f64],
    at: &[f64],
    span: usize,
    degree: Degree,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>, StlError> {
    Loess::new(xs, ys, span, degree, weights)?.fit(at)
}
