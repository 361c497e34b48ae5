use thiserror::Error;

/// Errors produced by model construction, training, explanation and IO.
#[derive(Debug, Error)]
pub enum XnnError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value at {path}")]
    NonFinite { path: String },

    #[error("numeric divergence at epoch {epoch}, batch {batch}: non-finite value at {path}")]
    Divergence {
        epoch: usize,
        batch: usize,
        path: String,
    },

    #[error("degenerate input: column `{column}` has zero standard deviation")]
    Degenerate { column: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error at field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error at field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl XnnError {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        XnnError::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        XnnError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dimension(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        XnnError::Dimension {
            what: what.into(),
            expected,
            actual,
        }
    }

    /// True for errors caused by bad user input (flags, configs, file contents)
    /// rather than by a failure while computing.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            XnnError::Config(_)
                | XnnError::Argument(_)
                | XnnError::Validation { .. }
                | XnnError::MissingColumn(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, XnnError>;
