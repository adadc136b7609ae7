use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("config: {0}")]
    Parse(String),
    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },
    #[error("solver failed: {0}")]
    Solver(#[from] jkoflow::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("prox check: {failures} of {count} instances deviate, max deviation {max_dev:.3e}")]
    OracleMismatch { failures: usize, count: usize, max_dev: f64 },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad input, 2 for anything that went wrong while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } | CliError::Parse(_) | CliError::UnknownPreset { .. } => 1,
            CliError::Solver(jkoflow::Error::InvalidParameter { .. })
            | CliError::Solver(jkoflow::Error::InvalidGrid(_)) => 1,
            _ => 2,
        }
    }
}
