//! Ordinary least squares via Householder QR.

use nalgebra::{DMatrix, DVector};

pub(crate) struct OlsFit {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub rss: f64,
}

/// Columns `1, t, (t - ψ_k)₊` and, when `augmented`, the step regressors
/// `1{t > ψ_k}`.
pub(crate) fn hinge_design(ts: &[f64], psi: &[f64], augmented: bool) -> DMatrix<f64> {
    let k = psi.len();
    let p = 2 + k + if augmented { k } else { 0 };
    DMatrix::from_fn(ts.len(), p, |i, j| {
        let t = ts[i];
        match j {
            0 => 1.0,
            1 => t,
            j if j < 2 + k => (t - psi[j - 2]).max(0.0),
            j => {
                if t > psi[j - 2 - k] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    })
}

/// Least-squares coefficients with classical standard errors. `None` if the
/// design is numerically rank deficient.
pub(crate) fn ols(x: &DMatrix<f64>, y: &[f64]) -> Option<OlsFit> {
    let (n, p) = x.shape();
    if n <= p {
        return None;
    }
    let y = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * diag_max) {
        return None;
    }
    let qty = qr.q().transpose() * &y;
    let beta = r.solve_upper_triangular(&qty.rows(0, p).into_owned())?;
    let resid = &y - x * &beta;
    let rss = resid.norm_squared();
    let sigma2 = rss / (n - p) as f64;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p))?;
    let cov_diag = (&r_inv * r_inv.transpose()).diagonal();
    Some(OlsFit {
        beta: beta.iter().copied().collect(),
        se: cov_diag.iter().map(|v| (sigma2 * v).sqrt()).collect(),
        rss,
    })
}
