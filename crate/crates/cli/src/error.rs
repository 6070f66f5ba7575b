use std::fmt;
use std::path::Path;

use decoupling_core::caps::CapsError;
use decoupling_core::harness::HarnessError;
use decoupling_core::rescale::RescaleError;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// A check ran and did not pass (exit 1).
    Check(String),
    /// Invalid configuration (exit 2).
    Config(String),
    /// Reading or writing files failed (exit 3).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<CapsError> for CliError {
    fn from(e: CapsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<RescaleError> for CliError {
    fn from(e: RescaleError) -> Self {
        CliError::Check(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Caps(c) => c.into(),
            HarnessError::BudgetTooSmall(_)
            | HarnessError::ExponentOutOfRange(_)
            | HarnessError::TooFewScales(_)
            | HarnessError::NonCompatibleScales(_)
            | HarnessError::ScaleMismatch { .. }
            | HarnessError::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Check(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
