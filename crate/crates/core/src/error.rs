//! Crate-wide error type.

/// Errors surfaced by dataset handling, estimators and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input data; `row` is the 1-based data row (header excluded).
    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },

    /// Invalid configuration (bad flags, empty grids, missing columns, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input violates a mathematical precondition (all-zero weights, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (singular system, non-finite value, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
