//! Command-line front end: configuration, subcommands, reports and plots.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::Context;
pub use config::{AnalysisConfig, Overrides};

use crate::synthetic::SyntheticCity;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trendlens", version, about = "Monthly incident-count trend analysis")]
pub struct Cli {
    #[command(flatten)]
    pub options: Options,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Raw incident CSV.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Category collapse and classification rules.
    #[arg(long, global = true)]
    pub category_map: Option<PathBuf>,
    /// GeoJSON FeatureCollection of neighborhood polygons.
    #[arg(long, global = true)]
    pub geometry: Option<PathBuf>,
    /// Station CSV (`name,lat,lon,radius_m`).
    #[arg(long, global = true)]
    pub stations: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Falls back to the config file, then TRENDLENS_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// STL trend window (odd, >= 3).
    #[arg(long, global = true)]
    pub w_trend: Option<usize>,
    /// MOSUM bandwidth G.
    #[arg(long, global = true)]
    pub mosum_g: Option<usize>,
    /// Minimum change-point separation, in multiples of G.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Fraction of G the statistic must stay above the threshold around a change-point.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Number of segmented-regression breakpoints.
    #[arg(long, global = true)]
    pub breakpoints: Option<usize>,
}

impl From<Options> for Overrides {
    fn from(o: Options) -> Self {
        Overrides {
            config: o.config,
            input: o.input,
            category_map: o.category_map,
            geometry: o.geometry,
            stations: o.stations,
            out: o.out,
            seed: o.seed,
            w_trend: o.w_trend,
            mosum_g: o.mosum_g,
            eta: o.eta,
            epsilon: o.epsilon,
            breakpoints: o.breakpoints,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Parse, collapse, threshold and classify; writes the normalized record file.
    Ingest,
    /// City-wide before/after Welch tests and histograms.
    Citywide,
    /// Per-neighborhood Welch tests and STL panels.
    Neighborhoods,
    /// Per-station tests over the three epochs.
    Stations,
    /// STL trend slope and MOSUM change-points.
    Changepoint,
    /// Segmented regression on observed counts and STL trends.
    Segreg,
    /// Everything above that the configuration supports.
    ReportAll,
    /// Write a synthetic incident export (for demos and tests).
    Synthesize {
        /// Destination CSV.
        #[arg(long)]
        to: PathBuf,
        /// Rate multiplier.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Citywide => "citywide",
            Command::Neighborhoods => "neighborhoods",
            Command::Stations => "stations",
            Command::Changepoint => "changepoint",
            Command::Segreg => "segreg",
            Command::ReportAll => "report-all",
            Command::Synthesize { .. } => "synthesize",
        }
    }
}

fn synthesize(seed: u64, to: &PathBuf, scale: f64) -> Result<(), CliError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Config(format!("--scale must be positive, got {scale}")));
    }
    let city = SyntheticCity { seed, scale, ..SyntheticCity::default() };
    let file = std::fs::File::create(to).map_err(|e| CliError::Config(format!("{}: {e}", to.display())))?;
    city.write_csv(std::io::BufWriter::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", to.display())))?;
    println!("synthesize: wrote {}", to.display());
    Ok(())
}

/// Runs one parsed invocation. Numerical failures that did not abort the
/// command are reported after all artifacts and the manifest are written.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = AnalysisConfig::resolve(cli.options.into())?;
    if let Command::Synthesize { to, scale } = &cli.command {
        return synthesize(cfg.seed, to, *scale);
    }
    let command = cli.command.name();
    let mut ctx = Context::new(cfg)?;
    let records = match cli.command {
        Command::Ingest | Command::ReportAll => commands::cmd_ingest(&mut ctx)?,
        _ => commands::load_records(&mut ctx)?,
    };
    match cli.command {
        Command::Ingest => {}
        Command::Citywide => commands::cmd_citywide(&mut ctx, &records)?,
        Command::Neighborhoods => commands::cmd_neighborhoods(&mut ctx, &records)?,
        Command::Stations => commands::cmd_stations(&mut ctx, &records)?,
        Command::Changepoint => commands::cmd_changepoint(&mut ctx, &records)?,
        Command::Segreg => commands::cmd_segreg(&mut ctx, &records)?,
        Command::ReportAll => {
            commands::cmd_citywide(&mut ctx, &records)?;
            if ctx.cfg.geometry.is_some() {
                commands::cmd_neighborhoods(&mut ctx, &records)?;
            }
            if ctx.cfg.stations.is_some() {
                commands::cmd_stations(&mut ctx, &records)?;
            }
            commands::cmd_changepoint(&mut ctx, &records)?;
            commands::cmd_segreg(&mut ctx, &records)?;
        }
        Command::Synthesize { .. } => unreachable!(),
    }
    let cfg = &ctx.cfg;
    let mut inputs: Vec<(&str, &std::path::Path)> = Vec::new();
    for (role, p) in [("input", &cfg.input), ("category_map", &cfg.category_map), ("geometry", &cfg.geometry), ("stations", &cfg.stations)] {
        if let Some(p) = p {
            inputs.push((role, p.as_path()));
        }
    }
    output::write_manifest(&ctx.out, command, cfg, cfg.hash(), &inputs)?;
    if ctx.numerical_failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(ctx.numerical_failures.join("; ")))
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("trendlens: {e}");
            e.exit_code()
        }
    }
}
