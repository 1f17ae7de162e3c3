use std::path::{Path, PathBuf};

use spiralres_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Header names that match neither accepted layout, or a manifest key
    /// without a recognised unit.
    #[error("{}: {message}", path.display())]
    Unit { path: PathBuf, message: String },

    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    NonConvergence(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn unit(path: &Path, message: impl Into<String>) -> Self {
        CliError::Unit {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 0 success, 2 validation, 3 fit non-convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 4,
            CliError::NonConvergence(_) => 3,
            CliError::Core(e) if is_fit_failure(e) => 3,
            _ => 2,
        }
    }
}

pub fn is_fit_failure(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NoConvergence { .. } | CoreError::IllConditioned { .. }
    )
}
