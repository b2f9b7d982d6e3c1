//! Continuous piecewise-linear regression with a fixed number of breakpoints.
//!
//! The iterative estimator linearizes each hinge `δ(t - ψ)₊` around the
//! current `ψ̃` by adding a step regressor `1{t > ψ̃}`; its coefficient
//! measures how far the breakpoint should move. Chains restart from jittered
//! initial guesses and the lowest residual sum of squares wins.
//! [`fit_segmented_exhaustive`] scans the month grid and serves as an oracle.

mod exhaustive;
mod ols;

pub use exhaustive::{fit_segmented_exhaustive, fit_segmented_exhaustive_xy, MAX_GRID_CANDIDATES};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::student_t_quantile;
use crate::series::{MonthlySeries, YearMonth};
use ols::{hinge_design, ols, OlsFit};

#[derive(Debug, Error, PartialEq)]
pub enum SegregError {
    #[error("at least one breakpoint is required")]
    NoBreakpoints,
    #[error("{len} points cannot support {k} breakpoints (need at least {need})")]
    TooShort { len: usize, k: usize, need: usize },
    #[error("timestamps and values differ in length")]
    LengthMismatch,
    #[error("timestamps must be strictly increasing and finite")]
    BadTimestamps,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("expected {expected} initial breakpoints, got {got}")]
    InitialCount { expected: usize, got: usize },
    #[error("no stable breakpoint configuration")]
    NoStableConfiguration,
    #[error("exhaustive search supports at most 2 breakpoints, got {0}")]
    ExhaustiveTooManyBreakpoints(usize),
    #[error("exhaustive grid of {0} candidates exceeds the limit")]
    GridTooLarge(u128),
    #[error("stability probe needs at least 2 runs")]
    TooFewRuns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    /// Equally spaced sample quantiles of time, `k / (K + 1)`.
    Quantile,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegregConfig {
    pub n_breakpoints: usize,
    pub initial: InitialGuess,
    pub max_iterations: usize,
    /// Stop once no breakpoint moves more than this (in time units).
    pub tolerance: f64,
    /// Jittered chains run in addition to the one from the initial guess.
    pub restarts: usize,
    /// Half-width of the uniform restart jitter.
    pub jitter: f64,
    /// Extra deterministic chains started from every ordered choice of
    /// breakpoints among this many evenly spaced interior positions. Zero
    /// disables the scan.
    pub spread_starts: usize,
    pub seed: u64,
}

impl Default for SegregConfig {
    fn default() -> Self {
        Self::new(2)
    }
}

impl SegregConfig {
    pub fn new(n_breakpoints: usize) -> Self {
        Self {
            n_breakpoints,
            initial: InitialGuess::Quantile,
            max_iterations: 50,
            tolerance: 1e-6,
            restarts: 10,
            jitter: 6.0,
            spread_starts: 7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Breakpoint {
    /// Position on the time axis (month index for monthly series).
    pub position: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentedFit {
    pub intercept: f64,
    pub slope: f64,
    pub deltas: Vec<f64>,
    pub breakpoints: Vec<Breakpoint>,
    pub rss: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl SegmentedFit {
    pub fn positions(&self) -> Vec<f64> {
        self.breakpoints.iter().map(|b| b.position).collect()
    }

    pub fn predict(&self, t: f64) -> f64 {
        let mut v = self.intercept + self.slope * t;
        for (d, b) in self.deltas.iter().zip(&self.breakpoints) {
            v += d * (t - b.position).max(0.0);
        }
        v
    }

    /// Slope of each of the `K + 1` segments.
    pub fn segment_slopes(&self) -> Vec<f64> {
        let mut out = vec![self.slope];
        let mut s = self.slope;
        for d in &self.deltas {
            s += d;
            out.push(s);
        }
        out
    }
}

/// Breakpoints of a monthly fit, rounded to calendar months.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyBreakpoint {
    pub month: YearMonth,
    pub ci_months: (YearMonth, YearMonth),
    pub position: f64,
    pub se: f64,
}

pub fn breakpoint_months(fit: &SegmentedFit, start: YearMonth) -> Vec<MonthlyBreakpoint> {
    fit.breakpoints
        .iter()
        .map(|b| MonthlyBreakpoint {
            month: start.offset_rounded(b.position),
            ci_months: (start.offset_rounded(b.ci.0), start.offset_rounded(b.ci.1)),
            position: b.position,
            se: b.se,
        })
        .collect()
}

fn validate_xy(ts: &[f64], ys: &[f64], k: usize) -> Result<(), SegregError> {
    if k == 0 {
        return Err(SegregError::NoBreakpoints);
    }
    if ts.len() != ys.len() {
        return Err(SegregError::LengthMismatch);
    }
    let need = 4 * (k + 1);
    if ts.len() < need || 4 * k >= ts.len() {
        return Err(SegregError::TooShort { len: ts.len(), k, need });
    }
    if ts.iter().any(|t| !t.is_finite()) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SegregError::BadTimestamps);
    }
    if let Some(i) = ys.iter().position(|v| !v.is_finite()) {
        return Err(SegregError::NonFinite(i));
    }
    Ok(())
}

/// Breakpoints usable by the design: strictly increasing and strictly inside
/// the span of the data.
fn admissible(psi: &[f64], ts: &[f64]) -> bool {
    let (lo, hi) = (ts[0], ts[ts.len() - 1]);
    psi.iter().all(|p| p.is_finite() && *p > lo && *p < hi) && psi.windows(2).all(|w| w[1] > w[0])
}

fn quantile_guesses(ts: &[f64], k: usize) -> Vec<f64> {
    let n = ts.len();
    (1..=k)
        .map(|j| {
            let pos = j as f64 / (k + 1) as f64 * (n - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < n {
                ts[i] + frac * (ts[i + 1] - ts[i])
            } else {
                ts[i]
            }
        })
        .collect()
}

fn plain_fit(ts: &[f64], ys: &[f64], psi: &[f64]) -> Option<OlsFit> {
    ols(&hinge_design(ts, psi, false), ys)
}

struct Chain {
    psi: Vec<f64>,
    rss: f64,
    converged: bool,
    iterations: usize,
}

/// One linearization chain from `start`. `None` when the design degenerates
/// or a slope change collapses to zero.
fn run_chain(ts: &[f64], ys: &[f64], start: Vec<f64>, config: &SegregConfig) -> Option<Chain> {
    let mut psi = start;
    if !admissible(&psi, ts) {
        return None;
    }
    let k = psi.len();
    let mut rss = plain_fit(ts, ys, &psi)?.rss;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let aug = ols(&hinge_design(ts, &psi, true), ys)?;
        // coefficients: [β0, β1, δ_1..δ_K, γ_1..γ_K]
        let deltas = &aug.beta[2..2 + k];
        let gammas = &aug.beta[2 + k..];
        if deltas.iter().any(|d| d.abs() < 1e-12) {
            return None;
        }
        let step: Vec<f64> = gammas.iter().zip(deltas).map(|(g, d)| -g / d).collect();

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let cand: Vec<f64> = psi.iter().zip(&step).map(|(p, s)| p + scale * s).collect();
            if admissible(&cand, ts) {
                if let Some(fit) = plain_fit(ts, ys, &cand) {
                    if fit.rss <= rss {
                        accepted = Some((cand, fit.rss));
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        let Some((cand, cand_rss)) = accepted else {
            // no improving step along the linearized direction
            converged = step.iter().all(|s| s.abs() * scale < config.tolerance);
            break;
        };
        let moved = cand.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        psi = cand;
        rss = cand_rss;
        if moved < config.tolerance {
            converged = true;
            break;
        }
    }
    Some(Chain {
        psi,
        rss,
        converged,
        iterations,
    })
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn jittered(base: &[f64], ts: &[f64], jitter: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = (ts[0], ts[ts.len() - 1]);
    let margin = (hi - lo) * 1e-3;
    let mut v: Vec<f64> = base
        .iter()
        .map(|p| (p + rng.gen_range(-jitter..=jitter)).clamp(lo + margin, hi - margin))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// All increasing `k`-subsets of `m` evenly spaced interior positions.
fn spread_guesses(ts: &[f64], k: usize, m: usize) -> Vec<Vec<f64>> {
    if m < k {
        return Vec::new();
    }
    let grid = quantile_guesses(ts, m);
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| grid[i]).collect());
        // next combination in lexicographic order
        let Some(j) = (0..k).rev().find(|&j| idx[j] < m - k + j) else { break };
        idx[j] += 1;
        for l in j + 1..k {
            idx[l] = idx[l - 1] + 1;
        }
    }
    out
}

fn initial_guesses(ts: &[f64], config: &SegregConfig) -> Result<Vec<f64>, SegregError> {
    let k = config.n_breakpoints;
    match &config.initial {
        InitialGuess::Quantile => Ok(quantile_guesses(ts, k)),
        InitialGuess::Explicit(v) if v.len() == k => {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            Ok(v)
        }
        InitialGuess::Explicit(v) => Err(SegregError::InitialCount { expected: k, got: v.len() }),
    }
}

/// Coefficients, standard errors and intervals at fixed breakpoints `psi`.
fn finish(ts: &[f64], ys: &[f64], chain: Chain) -> Option<SegmentedFit> {
    let psi = chain.psi;
    let k = psi.len();
    let plain = plain_fit(ts, ys, &psi)?;
    let aug = ols(&hinge_design(ts, &psi, true), ys)?;
    let dof = ts.len() - 2 - 2 * k;
    let t975 = student_t_quantile(0.975, dof as f64).ok()?;
    let breakpoints = (0..k)
        .map(|j| {
            let se = aug.se[2 + k + j] / aug.beta[2 + j].abs();
            Breakpoint {
                position: psi[j],
                se,
                ci: (psi[j] - t975 * se, psi[j] + t975 * se),
            }
        })
        .collect();
    Some(SegmentedFit {
        intercept: plain.beta[0],
        slope: plain.beta[1],
        deltas: plain.beta[2..].to_vec(),
        breakpoints,
        rss: plain.rss,
        dof,
        converged: chain.converged,
        iterations: chain.iterations,
    })
}

fn better(a: &Chain, b: &Chain) -> bool {
    match a.rss.total_cmp(&b.rss) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.psi.iter().zip(&b.psi).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y),
    }
}

/// The rss surface has a kink at every observation, so a converged chain can
/// sit in a shallow basin next to a better one. Moves one breakpoint at a
/// time to each observed timestamp within the jitter radius; whenever that
/// lowers rss, a new chain starts there. Stops when no move helps.
fn polish(ts: &[f64], ys: &[f64], mut best: Chain, config: &SegregConfig) -> Chain {
    const MAX_ROUNDS: usize = 20;
    for _ in 0..MAX_ROUNDS {
        let mut found: Option<(Vec<f64>, f64)> = None;
        for k in 0..best.psi.len() {
            let (lo, hi) = (best.psi[k] - config.jitter, best.psi[k] + config.jitter);
            let from = ts.partition_point(|&t| t < lo);
            for &t in ts[from..].iter().take_while(|&&t| t <= hi) {
                let mut cand = best.psi.clone();
                cand[k] = t;
                if !admissible(&cand, ts) {
                    continue;
                }
                let Some(fit) = plain_fit(ts, ys, &cand) else { continue };
                let bar = found.as_ref().map_or(best.rss * (1.0 - 1e-12), |f| f.1);
                if fit.rss < bar {
                    found = Some((cand, fit.rss));
                }
            }
        }
        let Some((start, _)) = found else { break };
        match run_chain(ts, ys, start, config) {
            Some(chain) if chain.rss < best.rss => {
                best = Chain {
                    iterations: best.iterations + chain.iterations,
                    ..chain
                }
            }
            _ => break,
        }
    }
    best
}

/// Segmented fit on arbitrary strictly increasing timestamps.
pub fn fit_segmented_xy(ts: &[f64], ys: &[f64], config: &SegregConfig) -> Result<SegmentedFit, SegregError> {
    validate_xy(ts, ys, config.n_breakpoints)?;
    // work relative to the first timestamp; keeps the design well scaled and
    // makes a shift of the time axis a pure relabelling
    let origin = ts[0];
    let local: Vec<f64> = ts.iter().map(|t| t - origin).collect();
    let base: Vec<f64> = initial_guesses(ts, config)?.iter().map(|p| p - origin).collect();

    let mut starts = vec![base.clone()];
    for c in 1..=config.restarts {
        starts.push(jittered(&base, &local, config.jitter, &mut chain_rng(config.seed, c)));
    }
    if config.spread_starts > 0 {
        starts.extend(spread_guesses(&local, config.n_breakpoints, config.spread_starts));
    }
    let chains: Vec<Option<Chain>> = starts.into_par_iter().map(|start| run_chain(&local, ys, start, config)).collect();

    let best = chains
        .into_iter()
        .flatten()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .ok_or(SegregError::NoStableConfiguration)?;
    let best = polish(&local, ys, best, config);
    let mut fit = finish(&local, ys, best).ok_or(SegregError::NoStableConfiguration)?;
    shift_fit(&mut fit, origin);
    Ok(fit)
}

/// Moves a fit computed on `t - origin` back to the original time axis.
fn shift_fit(fit: &mut SegmentedFit, origin: f64) {
    fit.intercept -= fit.slope * origin;
    for b in &mut fit.breakpoints {
        b.position += origin;
        b.ci = (b.ci.0 + origin, b.ci.1 + origin);
    }
}

fn month_axis(series: &MonthlySeries) -> Vec<f64> {
    (0..series.len()).map(|i| i as f64).collect()
}

/// Segmented fit of a monthly series with time measured in months from its
/// first observation.
pub fn fit_segmented(series: &MonthlySeries, config: &SegregConfig) -> Result<SegmentedFit, SegregError> {
    fit_segmented_xy(&month_axis(series), series.values(), config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Breakpoint positions of each successful run.
    pub runs: Vec<Vec<f64>>,
    pub failed_runs: usize,
    /// Max minus min position, per breakpoint.
    pub spread: Vec<f64>,
    pub unstable: bool,
}

/// Spread beyond which a breakpoint is considered unstable.
pub const UNSTABLE_SPREAD: f64 = 6.0;

/// Fits single chains from independently jittered initial guesses and
/// reports how far each breakpoint wanders.
pub fn stability_probe_xy(ts: &[f64], ys: &[f64], config: &SegregConfig, runs: usize) -> Result<StabilityReport, SegregError> {
    if runs < 2 {
        return Err(SegregError::TooFewRuns);
    }
    validate_xy(ts, ys, config.n_breakpoints)?;
    let origin = ts[0];
    let local: Vec<f64> = ts.iter().map(|t| t - origin).collect();
    let base: Vec<f64> = initial_guesses(ts, config)?.iter().map(|p| p - origin).collect();
    let results: Vec<Option<Vec<f64>>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            // streams offset past the restart chains of a regular fit
            let start = jittered(&base, &local, config.jitter, &mut chain_rng(config.seed, 1_000_000 + r));
            run_chain(&local, ys, start, config).map(|c| c.psi.iter().map(|p| p + origin).collect())
        })
        .collect();
    let failed_runs = results.iter().filter(|r| r.is_none()).count();
    let ok: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let k = config.n_breakpoints;
    let spread: Vec<f64> = (0..k)
        .map(|j| {
            let (lo, hi) = ok.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
            if ok.is_empty() {
                f64::INFINITY
            } else {
                hi - lo
            }
        })
        .collect();
    // more than half the runs failing is itself a sign of instability
    let unstable = spread.iter().any(|s| *s > UNSTABLE_SPREAD) || 2 * failed_runs > runs;
    Ok(StabilityReport {
        runs: ok,
        failed_runs,
        spread,
        unstable,
    })
}

pub fn stability_probe(series: &MonthlySeries, config: &SegregConfig, runs: usize) -> Result<StabilityReport, SegregError> {
    stability_probe_xy(&month_axis(series), series.values(), config, runs)
}
