use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A file referenced by the manifest could not be read.
    #[error("ingestion error: {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    /// Input data violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Model fitting received unusable input.
    #[error("fit error: {0}")]
    Fit(String),

    /// An operation was called on an input it is not defined for.
    #[error("undefined input: {0}")]
    UndefinedInput(String),

    /// Shapes of paired inputs do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A persisted model or report file is malformed.
    #[error("model io error: {0}")]
    ModelIo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
