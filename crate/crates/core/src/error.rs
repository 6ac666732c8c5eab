use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced while building, fitting, or evaluating forests.
#[derive(Debug, Error)]
pub enum Error {
    /// A query or dataset does not match the expected shape.
    #[error("input error: {0}")]
    Input(String),

    /// An inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A split that would leave one child without resampled points.
    #[error("invalid split: {0}")]
    InvalidSplit(String),

    /// The operation has no meaning for this model (e.g. averaging weights of
    /// a forest with regressor leaves).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Unknown registry or catalog name.
    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },

    /// Malformed tabular input.
    #[error("{path}: {message}{}", location(.row, .column))]
    Ingest {
        path: PathBuf,
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    /// A structural invariant was violated. Indicates a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn location(row: &Option<usize>, column: &Option<String>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!(" (row {r}, column `{c}`)"),
        (Some(r), None) => format!(" (row {r})"),
        (None, Some(c)) => format!(" (column `{c}`)"),
        (None, None) => String::new(),
    }
}
