//! The `corrstoch` command line: argument parsing, configuration and modes.
//!
//! Configuration comes from an optional JSON file and from flags; flags win.
//! Reports go to stdout, diagnostics to stderr. Exit code 0 means success,
//! 1 a failed check and 2 a configuration error naming the offending field.

mod config;
mod modes;

use std::path::PathBuf;

use clap::Parser;

pub use config::{ExperimentConfig, Mode, OutputFormat};
pub use modes::run;

/// Current report layout version, written as `schema_version`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "corrstoch",
    version,
    about = "Stochastic dynamics with initial system-environment correlations"
)]
pub struct Args {
    /// One of demo, check, secondlaw, tomography, random-instance.
    pub mode: Option<String>,
    /// JSON configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub dim_system: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dim_env: Option<i64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub trials: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub samples: Option<i64>,
    /// Allowed violation of the checked inequalities.
    #[arg(long, allow_negative_numbers = true)]
    pub tolerance: Option<f64>,
    /// nats or bits.
    #[arg(long)]
    pub units: Option<String>,
    /// json or csv.
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid value for `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Run(#[from] crate::Error),
}

impl CliError {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Self::Config {
            field: field.to_owned(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config { .. } => 2,
            Self::Run(_) => 1,
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub diagnostics: Vec<String>,
    pub exit_code: u8,
}

/// Parses configuration from `args` and runs the selected mode.
pub fn execute(args: &Args) -> Result<Outcome, CliError> {
    let cfg = ExperimentConfig::from_args(args)?;
    run(&cfg)
}
