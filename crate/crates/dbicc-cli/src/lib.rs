//! Batch reliability analysis from the command line.
//!
//! Every command parses its input, calls the `dbicc` library, and prints JSON
//! (or CSV for threshold sweeps). Exit codes: 0 success, 2 input error,
//! 3 computation error, 4 configuration error.

mod commands;
pub mod input;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
    #[error("[{}] {}", .0.kind_name(), .0)]
    Compute(#[from] dbicc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Config(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dbicc", version, about = "Distance-based intraclass correlation")]
pub struct Cli {
    /// Maximum number of worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimate of the dbICC.
    Estimate(EstimateArgs),
    /// Bootstrap percentile interval for the dbICC.
    Bootstrap(BootstrapArgs),
    /// dbICC over a grid of soft-thresholds (CSV output).
    SweepThreshold(SweepArgs),
    /// Simulation experiments.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    L2,
    L1,
    Corr,
}

impl From<DistanceArg> for dbicc::DistanceKind {
    fn from(d: DistanceArg) -> Self {
        match d {
            DistanceArg::L2 => dbicc::DistanceKind::L2,
            DistanceArg::L1 => dbicc::DistanceKind::L1,
            DistanceArg::Corr => dbicc::DistanceKind::CorrOfCorr,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Vector CSV, time-series manifest, or distances.csv (with --groups).
    #[arg(long)]
    pub input: PathBuf,

    /// Group labels for distance-matrix input.
    #[arg(long)]
    pub groups: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "auto")]
    pub format: input::InputFormat,

    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum, default_value = "l2")]
    pub distance: DistanceArg,

    /// Soft-threshold applied to correlation matrices before distancing.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub estimate: EstimateArgs,

    /// Number of bootstrap replicates.
    #[arg(long = "boot", default_value_t = 1200)]
    pub boot: usize,

    /// Confidence level of the percentile interval.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Exclude duplicated-individual blocks from between sums (default).
    #[arg(long, conflicts_with = "naive")]
    pub corrected: bool,

    /// Plain bootstrap without the duplicate-block correction.
    #[arg(long)]
    pub naive: bool,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Per-replicate CSV log with naive and corrected estimates.
    #[arg(long)]
    pub replicate_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Distances to evaluate.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "l2,l1,corr")]
    pub distance: Vec<DistanceArg>,

    /// Threshold grid `start:stop:step`.
    #[arg(long)]
    pub threshold_grid: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Point estimates on Gaussian vector data.
    Point,
    /// Naive and corrected bootstrap coverage on Gaussian vector data.
    Coverage,
    /// Log-log SNR versus intensity curves for connectivity matrices.
    Sb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixArg {
    Cov,
    Corr,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,

    /// Population dbICC of the Gaussian design.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,

    /// Number of individuals (default 40 for point/coverage, 25 for sb).
    #[arg(long)]
    pub individuals: Option<usize>,

    /// Replicates per individual (default 4 for point/coverage, 2 for sb).
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Outer Monte Carlo replicates.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,

    #[arg(long = "boot", default_value_t = 1200)]
    pub boot: usize,

    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Dimension of the connectivity matrices.
    #[arg(long, default_value_t = 40)]
    pub p: usize,

    /// Wishart degrees of freedom for the covariance population.
    #[arg(long, default_value_t = 100)]
    pub df: usize,

    /// Lag-1 autocorrelation of the simulated series.
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,

    #[arg(long, value_enum, default_value = "cov")]
    pub matrix: MatrixArg,

    #[arg(long, value_enum, default_value = "l2")]
    pub distance: DistanceArg,

    /// Comma-separated intensities (default: 8 log-spaced values in [25, 197]).
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,

    #[arg(long, default_value_t = 1)]
    pub sb_offset: u32,

    /// Independent curves for the sb experiment.
    #[arg(long, default_value_t = 20)]
    pub curves: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// JSON report path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Plot-ready CSV of per-replicate or per-point values.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.exit_code()
        }
    }
}
