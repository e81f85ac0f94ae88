//! Configuration-driven runner: parses a run configuration, dispatches to
//! the toolkit, and persists grids, reports and a checksummed manifest.

pub mod config;
pub mod output;
pub mod run;

use std::fmt;

/// Errors split by the exit status they map to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Parse or validation failure (exit status 2).
    Config(String),
    /// Failure while running the task (exit status 3).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
