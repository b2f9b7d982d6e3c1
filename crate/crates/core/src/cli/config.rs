//! Analysis configuration: an optional TOML file, then command-line overrides.
//!
//! ```toml
//! input = "data/incidents.csv"
//! category_map = "config/category_map.txt"
//! geometry = "config/neighborhoods_demo.geojson"
//! stations = "config/stations.csv"
//! out = "out"
//! seed = 0
//!
//! [schema]      # input column names
//! date = "date"
//!
//! [window]
//! first = "2006-01-01"
//! last = "2019-12-31"
//!
//! [epochs]
//! policy = "2014-11"   # month opens the later epoch
//! rail = "2016-05"     # month closes the earlier epoch
//!
//! [stl]
//! trend_window = 19    # omit for the automatic rule
//!
//! [mosum]
//! bandwidth = 10
//! eta = 12.0
//! epsilon = 0.5
//!
//! [segreg]
//! breakpoints = 2
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::changepoint::{MosumConfig, VarianceRule};
use crate::ingest::{DateRange, Schema};
use crate::segreg::{InitialGuess, SegregConfig};
use crate::series::{EpochCut, EpochSplit, YearMonth};
use crate::stl::{SeasonalWindow, StlConfig, TrendWindow};

pub const SEED_ENV: &str = "TRENDLENS_SEED";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    input: Option<PathBuf>,
    category_map: Option<PathBuf>,
    geometry: Option<PathBuf>,
    stations: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    schema: Schema,
    window: WindowSection,
    epochs: EpochSection,
    welch: WelchSection,
    stl: StlSection,
    mosum: MosumSection,
    segreg: SegregSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WindowSection {
    first: NaiveDate,
    last: NaiveDate,
}

impl Default for WindowSection {
    fn default() -> Self {
        let r = DateRange::study_period();
        Self { first: r.first, last: r.last }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpochSection {
    pub policy: YearMonth,
    pub rail: YearMonth,
}

impl Default for EpochSection {
    fn default() -> Self {
        Self { policy: EpochSplit::policy_cut().month, rail: EpochSplit::rail_cut().month }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WelchSection {
    alpha: f64,
}

impl Default for WelchSection {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StlSection {
    period: usize,
    /// Seasonal loess span in cycles; omitted means periodic.
    seasonal_window: Option<usize>,
    trend_window: Option<usize>,
    lowpass_window: Option<usize>,
    inner_iterations: usize,
    outer_iterations: usize,
}

impl Default for StlSection {
    fn default() -> Self {
        let d = StlConfig::monthly();
        Self {
            period: d.period,
            seasonal_window: None,
            trend_window: None,
            lowpass_window: None,
            inner_iterations: d.inner_iterations,
            outer_iterations: d.outer_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MosumSection {
    bandwidth: usize,
    eta: f64,
    epsilon: f64,
    alpha: f64,
    variance_rule: VarianceRule,
    bootstrap_replicates: usize,
}

impl Default for MosumSection {
    fn default() -> Self {
        let d = MosumConfig::default();
        Self {
            bandwidth: d.bandwidth,
            eta: d.eta,
            epsilon: d.epsilon,
            alpha: d.alpha,
            variance_rule: d.variance_rule,
            bootstrap_replicates: d.bootstrap_replicates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SegregSection {
    breakpoints: usize,
    max_iterations: usize,
    tolerance: f64,
    restarts: usize,
    jitter: f64,
    spread_starts: usize,
    stability_runs: usize,
}

impl Default for SegregSection {
    fn default() -> Self {
        let d = SegregConfig::default();
        Self {
            breakpoints: d.n_breakpoints,
            max_iterations: d.max_iterations,
            tolerance: d.tolerance,
            restarts: d.restarts,
            jitter: d.jitter,
            spread_starts: d.spread_starts,
            stability_runs: 20,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub category_map: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
    pub stations: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub w_trend: Option<usize>,
    pub mosum_g: Option<usize>,
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
    pub breakpoints: Option<usize>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub input: Option<PathBuf>,
    pub category_map: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
    pub stations: Option<PathBuf>,
    /// Not part of the config hash: where results go does not change them.
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    pub schema: Schema,
    pub window: DateRange,
    pub epochs: EpochSection,
    pub welch_alpha: f64,
    pub stl: StlConfig,
    pub mosum: MosumConfig,
    pub segreg: SegregConfig,
    pub stability_runs: usize,
}

fn resolve(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { base.join(p) } else { p })
}

impl AnalysisConfig {
    /// Reads the config file (if any) and applies overrides. The seed comes
    /// from the flag, then the file, then `TRENDLENS_SEED`, then 0.
    pub fn resolve(ov: Overrides) -> Result<Self, CliError> {
        let file = match &ov.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let parsed: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
                ConfigFile {
                    input: resolve(&base, parsed.input.clone()),
                    category_map: resolve(&base, parsed.category_map.clone()),
                    geometry: resolve(&base, parsed.geometry.clone()),
                    stations: resolve(&base, parsed.stations.clone()),
                    out: resolve(&base, parsed.out.clone()),
                    ..parsed
                }
            }
            None => ConfigFile::default(),
        };
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| CliError::Config(format!("{SEED_ENV}={v} is not an unsigned integer")))?),
            Err(_) => None,
        };
        let seed = ov.seed.or(file.seed).or(env_seed).unwrap_or(0);

        let window = DateRange::new(file.window.first, file.window.last).map_err(|e| CliError::Config(e.to_string()))?;
        let s = &file.stl;
        let stl = StlConfig {
            period: s.period,
            seasonal: s.seasonal_window.map_or(SeasonalWindow::Periodic, SeasonalWindow::Span),
            trend: ov.w_trend.or(s.trend_window).map_or(TrendWindow::Auto, TrendWindow::Span),
            lowpass: s.lowpass_window,
            inner_iterations: s.inner_iterations,
            outer_iterations: s.outer_iterations,
        };
        let m = &file.mosum;
        let mosum = MosumConfig {
            bandwidth: ov.mosum_g.unwrap_or(m.bandwidth),
            eta: ov.eta.unwrap_or(m.eta),
            epsilon: ov.epsilon.unwrap_or(m.epsilon),
            alpha: m.alpha,
            variance_rule: m.variance_rule,
            bootstrap_replicates: m.bootstrap_replicates,
            seed,
        };
        mosum.validate().map_err(|e| CliError::Config(format!("mosum: {e}")))?;
        let g = &file.segreg;
        let segreg = SegregConfig {
            n_breakpoints: ov.breakpoints.unwrap_or(g.breakpoints),
            initial: InitialGuess::Quantile,
            max_iterations: g.max_iterations,
            tolerance: g.tolerance,
            restarts: g.restarts,
            jitter: g.jitter,
            spread_starts: g.spread_starts,
            seed,
        };
        if segreg.n_breakpoints == 0 {
            return Err(CliError::Config("segreg: at least one breakpoint is required".into()));
        }
        if !(file.welch.alpha > 0.0 && file.welch.alpha <= 0.5) {
            return Err(CliError::Config(format!("welch alpha {} outside (0, 0.5]", file.welch.alpha)));
        }
        if file.epochs.rail <= file.epochs.policy {
            return Err(CliError::Config("epochs: the rail month must follow the policy month".into()));
        }
        Ok(Self {
            input: ov.input.or(file.input),
            category_map: ov.category_map.or(file.category_map),
            geometry: ov.geometry.or(file.geometry),
            stations: ov.stations.or(file.stations),
            out: ov.out.or(file.out).unwrap_or_else(|| PathBuf::from("trendlens-out")),
            seed,
            schema: file.schema,
            window,
            epochs: file.epochs,
            welch_alpha: file.welch.alpha,
            stl,
            mosum,
            segreg,
            stability_runs: g.stability_runs,
        })
    }

    pub fn policy_split(&self) -> EpochSplit {
        EpochSplit::new(vec![EpochCut::later(self.epochs.policy)])
    }

    /// Policy cut then rail cut: before, between, after.
    pub fn three_epochs(&self) -> EpochSplit {
        EpochSplit::new(vec![EpochCut::later(self.epochs.policy), EpochCut::earlier(self.epochs.rail)])
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        required(&self.input, "--input")
    }

    pub fn require_category_map(&self) -> Result<&Path, CliError> {
        required(&self.category_map, "--category-map")
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let p = p.as_deref().ok_or_else(|| CliError::Config(format!("{flag} is required (flag or config file)")))?;
    if !p.is_file() {
        return Err(CliError::Config(format!("{flag}: {} does not exist", p.display())));
    }
    Ok(p)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = AnalysisConfig::resolve(Overrides { seed: Some(5), w_trend: Some(23), eta: Some(0.4), ..Overrides::default() }).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.mosum.seed, 5);
        assert_eq!(c.segreg.seed, 5);
        assert_eq!(c.stl.trend_window().unwrap(), 23);
        assert_eq!(c.mosum.eta, 0.4);
        assert_eq!(c.mosum.bandwidth, 10);
        assert_eq!(c.segreg.n_breakpoints, 2);
        let d = AnalysisConfig::resolve(Overrides { seed: Some(5), ..Overrides::default() }).unwrap();
        assert_eq!(d.stl.trend_window().unwrap(), 19);
        assert_ne!(c.hash(), d.hash());
        let moved = AnalysisConfig::resolve(Overrides { seed: Some(5), out: Some("elsewhere".into()), ..Overrides::default() }).unwrap();
        assert_eq!(moved.hash(), d.hash());
    }

    #[test]
    fn file_values_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "input = \"data.csv\"\nseed = 9\n[mosum]\nbandwidth = 8\n[window]\nfirst = \"2007-01-01\"\n").unwrap();
        let c = AnalysisConfig::resolve(Overrides { config: Some(path.clone()), ..Overrides::default() }).unwrap();
        assert_eq!(c.input.as_deref(), Some(dir.path().join("data.csv").as_path()));
        assert_eq!(c.seed, 9);
        assert_eq!(c.mosum.bandwidth, 8);
        assert_eq!(c.window.first, NaiveDate::from_ymd_opt(2007, 1, 1).unwrap());
        let c = AnalysisConfig::resolve(Overrides { config: Some(path), mosum_g: Some(5), ..Overrides::default() }).unwrap();
        assert_eq!(c.mosum.bandwidth, 5);
    }

    #[test]
    fn bad_configs_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        for (i, text) in ["bogus = 1\n", "[mosum]\nepsilon = 2.0\n", "[segreg]\nbreakpoints = 0\n", "[epochs]\nrail = \"2013-01\"\n", "seed = \"x\"\n"].iter().enumerate() {
            let path = dir.path().join(format!("c{i}.toml"));
            std::fs::write(&path, text).unwrap();
            let r = AnalysisConfig::resolve(Overrides { config: Some(path), ..Overrides::default() });
            assert!(matches!(r, Err(CliError::Config(_))), "{text}");
        }
        let r = AnalysisConfig::resolve(Overrides { config: Some(dir.path().join("missing.toml")), ..Overrides::default() });
        assert!(matches!(r, Err(CliError::Config(_))));
    }
}
