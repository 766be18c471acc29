//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("cannot parse cell at row {row}, column '{column}': {value:?}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("target column '{0}' not found in header")]
    UnknownTarget(String),

    #[error("column '{0}' has no observed values")]
    EmptyColumn(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
