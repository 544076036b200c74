use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failures reported by the command-line front end.
///
/// Every variant maps to an exit code and a short kind tag; `main` prints
/// `error[<kind>]: <message>` on stderr.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{field}: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: u64, reason: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), reason: reason.into() }
    }

    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        CliError::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn parse(path: impl AsRef<Path>, line: u64, reason: impl Into<String>) -> Self {
        CliError::Parse { path: path.as_ref().to_path_buf(), line, reason: reason.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// 2 for usage and configuration problems, 3 for I/O, 4 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Parse { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<afsim_core::Error> for CliError {
    fn from(e: afsim_core::Error) -> Self {
        use afsim_core::Error as E;
        match e {
            E::Config { field, reason } => CliError::Config { field: field.to_string(), reason },
            E::Contract(reason) => CliError::config("contract", reason),
            e @ (E::ThresholdViolation { .. } | E::MaskViolation { .. }) => CliError::config("attack", e.to_string()),
            e @ (E::EpisodeTerminated | E::Numerical(_)) => CliError::Numerical(e.to_string()),
        }
    }
}
