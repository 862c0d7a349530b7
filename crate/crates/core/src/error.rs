use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HipError>;

#[derive(Debug, Error)]
pub enum HipError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid one-hot row {row} in subgroup {subgroup}")]
    InvalidOneHot { subgroup: usize, row: usize },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HipError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HipError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        match self {
            HipError::Io { .. } => true,
            HipError::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
