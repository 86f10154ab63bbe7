//! The `epiflow` command-line workflow: argument handling, data ingestion,
//! the six commands and artifact emission.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod data;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::run;
pub use config::{Cli, Command, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_WARNINGS: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] data::DataError),
    #[error("run failed: {0}")]
    Run(String),
    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => EXIT_DATA,
            _ => EXIT_CONFIG,
        }
    }
}

/// What a successful command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Human-readable report for standard output.
    pub report: String,
    pub artifacts: Vec<PathBuf>,
    /// Diagnostic warnings; they set exit code 3 unless allowed.
    pub warnings: Vec<String>,
    /// Names of parameters whose true value fell outside its interval.
    pub uncovered: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self, allow_warnings: bool) -> i32 {
        if !self.uncovered.is_empty() || (!allow_warnings && !self.warnings.is_empty()) {
            EXIT_WARNINGS
        } else {
            EXIT_OK
        }
    }
}
