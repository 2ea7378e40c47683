use std::io;

use thiserror::Error;

/// Errors produced by the decoding workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alist parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("code dimension k = {k} exceeds the enumeration limit of {limit}")]
    EnumerationLimit { k: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("nSMEA ranking requires a BP trace, but the outcome carries none")]
    MissingTrace,

    #[error("model dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
