//! Command-line front end: loads a run configuration, dispatches one scenario
//! and writes CSV tables, `summary.txt` and `manifest.txt`.

pub mod commands;
pub mod config;

use std::fmt;

pub use commands::{run, Command, Invocation};
pub use config::{parse_config, parse_config_str, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(Vec<String>),
    Numeric(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(errors) => {
                writeln!(f, "configuration rejected ({} problem(s)):", errors.len())?;
                for e in errors {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            CliError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dnp_core::Error> for CliError {
    fn from(e: dnp_core::Error) -> Self {
        match e {
            dnp_core::Error::InvalidParameter { name, reason } => CliError::Config(vec![format!("{name}: {reason}")]),
            dnp_core::Error::Dimension { .. } => CliError::Internal(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
