//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by data loading, model fitting, and calibration.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A file could not be parsed; names the offending row/column when known.
    #[error("parse error in {path}{}{}: {message}",
        row.map(|r| format!(", row {r}")).unwrap_or_default(),
        column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        /// Path of the file being parsed.
        path: String,
        /// 1-based data row (excluding the header), when known.
        row: Option<usize>,
        /// Column name, when known.
        column: Option<String>,
        /// What went wrong.
        message: String,
    },

    /// Well-formed input that violates a domain invariant (e.g. a
    /// probability row that does not sum to 1).
    #[error("validation error{}: {message}", id.as_ref().map(|i| format!(" for item {i}")).unwrap_or_default())]
    Validation {
        /// Item id the violation was detected on, when known.
        id: Option<String>,
        /// What went wrong.
        message: String,
    },

    /// A numerical routine produced a non-finite value or failed to make progress.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Pearson correlation requested on data with zero variance.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
