use std::path::PathBuf;
use thiserror::Error;

/// CLI-level errors with their process exit codes.
///
/// 0 success, 2 validation, 3 I/O, 4 non-convergence.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] nvcharge::Error),

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported schema in {path}: found {found}, this build reads major version {supported}")]
    Schema {
        path: PathBuf,
        found: String,
        supported: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(nvcharge::Error::NonConvergence(_)) => 4,
            CliError::Io { .. } => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
