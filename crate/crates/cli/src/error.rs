use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Every problem found in a scenario config, one per entry.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("{failed} bound check(s) failed")]
    BoundFailure { failed: usize },

    #[error("cannot report on an empty trace")]
    EmptyTrace,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(aixi::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Capacity(_) => 2,
            CliError::BoundFailure { .. } => 3,
            _ => 1,
        }
    }
}

impl From<aixi::Error> for CliError {
    fn from(e: aixi::Error) -> Self {
        match e {
            aixi::Error::Capacity(msg) => CliError::Capacity(msg),
            other => CliError::Core(other),
        }
    }
}
