//! Student's t distribution: density, CDF and quantile.

use std::f64::consts::PI;

use super::special::{beta_inc, ln_gamma};
use super::InferenceError;

fn check_dof(dof: f64) -> Result<(), InferenceError> {
    if dof > 0.0 && dof.is_finite() {
        Ok(())
    } else {
        Err(InferenceError::InvalidDof(dof))
    }
}

pub fn pdf(t: f64, dof: f64) -> Result<f64, InferenceError> {
    check_dof(dof)?;
    Ok(ln_pdf(t, dof).exp())
}

fn ln_pdf(t: f64, dof: f64) -> f64 {
    ln_gamma((dof + 1.0) / 2.0)
        - ln_gamma(dof / 2.0)
        - 0.5 * (dof * PI).ln()
        - (dof + 1.0) / 2.0 * (1.0 + t * t / dof).ln()
}

/// `P(T > |t|)`, computed without cancellation.
fn upper_tail_abs(t: f64, dof: f64) -> f64 {
    let x = dof / (dof + t * t);
    0.5 * beta_inc(dof / 2.0, 0.5, x)
}

pub fn cdf(t: f64, dof: f64) -> Result<f64, InferenceError> {
    check_dof(dof)?;
    if t.is_nan() {
        return Err(InferenceError::NonFinite);
    }
    let tail = upper_tail_abs(t, dof);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Inverse CDF. Solves `P(T > t) = 1 - p` in the upper tail by Newton
/// iteration on the tail probability, falling back to bisection whenever a
/// step leaves the current bracket.
pub fn quantile(p: f64, dof: f64) -> Result<f64, InferenceError> {
    check_dof(dof)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(InferenceError::InvalidProbability(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-upper_quantile(p, dof));
    }
    Ok(upper_quantile(1.0 - p, dof))
}

/// Positive `t` with `P(T > t) = q`, `0 < q < 0.5`.
fn upper_quantile(q: f64, dof: f64) -> f64 {
    let f = |t: f64| upper_tail_abs(t, dof) - q; // decreasing in t

    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }

    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let ft = f(t);
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // d/dt P(T > t) = -pdf(t)
        let slope = -ln_pdf(t, dof).exp();
        let mut next = t - ft / slope;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) || hi - lo <= 1e-15 * hi {
            return next;
        }
        t = next;
    }
    t
}
