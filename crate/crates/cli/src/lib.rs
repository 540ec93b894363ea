//! Experiment runner for the two-ion separation campaigns: optimization over final
//! times, line search through the solution cloud, waveform verification, and noise
//! studies. The `ionsep` binary is a thin shell over [`commands`].

pub mod artifacts;
pub mod commands;
pub mod config;

use std::fmt;

/// Failure classes, mapped to process exit codes by [`CliError::exit_code`].
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or input files.
    Config(String),
    /// The run itself failed as a whole.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ionsep_core::Error> for CliError {
    fn from(e: ionsep_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
