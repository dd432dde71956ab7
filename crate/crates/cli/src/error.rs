use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse configuration: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] mixfbm::Error),

    /// Outputs were written, but the optimizer did not certify its result.
    #[error("not converged: {0}")]
    NotConverged(String),
}

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 for validation and I/O, 2 for numerical failures, 3 for non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::NotConverged(_) => 3,
            _ => 1,
        }
    }
}
