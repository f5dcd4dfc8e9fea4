use std::path::PathBuf;

use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("video id sets differ; missing from predictions: [{}]; unexpected in predictions: [{}]",
        missing.join(", "), extra.join(", "))]
    VideoSetMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Exit-code contract used by the command-line tool:
    /// 2 usage or input-set mismatch, 3 validation, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::VideoSetMismatch { .. } => 2,
            Error::Validation(_) | Error::Parse { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}
