use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] fofe_lm::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Failed(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Core(e) if e.is_config_error() => 3,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Core(e) if e.is_config_error() => "config",
            CliError::Core(_) => "runtime",
            CliError::Io { .. } => "io",
            CliError::Failed(_) => "failed",
        }
    }

    /// Numeric code of the underlying library error, if any.
    pub fn code(&self) -> Option<u16> {
        match self {
            CliError::Core(e) => Some(e.code()),
            _ => None,
        }
    }
}
