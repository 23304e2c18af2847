//! Command-line experiment runner: config parsing, job scheduling and
//! result persistence on top of the `qdiscrim` library.

pub mod commands;
pub mod manifest;
pub mod pool;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use qdiscrim::config::ConfigError;
use qdiscrim::io::IoError;
use qdiscrim::krotov::KrotovError;
use qdiscrim::protocols::ProtocolError;

/// Environment variable capping the worker count.
pub const MAX_WORKERS_ENV: &str = "QDISCRIM_MAX_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qdiscrim", version, about = "Optimal control of qubit state discrimination")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Experiment description (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps; overrides `workers`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for randomized guesses; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Propagate both hypotheses and write Bloch trajectories.
    Propagate,
    /// Run Krotov's method for a single (δB, T).
    Optimize,
    /// Run every (δB, T) job of the config on a worker pool.
    Sweep,
    /// Fit the closed-form curve to a (delta_b, m) table.
    Fit(FitArgs),
    /// Print the speed-limit time π/δB.
    Qsl(QslArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Relaxation,
    Dephasing,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with `delta_b` and `m` columns.
    pub table: PathBuf,
    /// Noise channel of the data (taken from --config when omitted).
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    /// Nominal T1 or T2 (taken from --config when omitted).
    #[arg(long)]
    pub decay_time: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct QslArgs {
    /// Field splitting; the config's δB values are used when omitted.
    #[arg(long)]
    pub delta_b: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{failed} of {total} jobs failed")]
    PartialSweep { failed: usize, total: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::PartialSweep { .. } => EXIT_PARTIAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<KrotovError> for CliError {
    fn from(e: KrotovError) -> Self {
        match e {
            KrotovError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::InvalidParameter(_) | ProtocolError::Underdetermined(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Runs one parsed invocation; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Propagate => commands::propagate(&cli.global),
        Command::Optimize => commands::optimize(&cli.global),
        Command::Sweep => commands::sweep(&cli.global),
        Command::Fit(args) => commands::fit(&cli.global, args),
        Command::Qsl(args) => commands::qsl(&cli.global, args),
    }
}
