use std::path::Path;

use pairscreen::Error as CoreError;
use thiserror::Error;

/// Command failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    /// The correction could not be computed; other outputs were written.
    #[error("{0}")]
    CorrectionUnavailable(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::CorrectionUnavailable(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_)
            | CoreError::UnknownStrategy { .. }
            | CoreError::InvalidParams(_)
            | CoreError::Domain(_)
            | CoreError::Precondition(_) => CliError::Config(e.to_string()),
            CoreError::CorrectionUnavailable(_) => CliError::CorrectionUnavailable(e.to_string()),
            CoreError::Io(m) => CliError::Io(m),
            CoreError::Data(_)
            | CoreError::NoObservedCases
            | CoreError::InsufficientData(_)
            | CoreError::DegenerateRegion
            | CoreError::TestUnavailable => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
