use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("header mismatch at column {position}: expected \"{expected}\", found \"{found}\"")]
    HeaderMismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("cannot parse \"{value}\" at row {row}, column \"{column}\"")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("record {row} does not conform to schema: {reason}")]
    Conformance { row: usize, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} non-missing values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("missing value in field \"{0}\"")]
    MissingValue(String),

    #[error("preprocessing precondition not met: {0}")]
    Precondition(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("config error at {key}: {message}")]
    Config { key: String, message: String },
}

/// Coarse grouping used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Training,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => ErrorCategory::Config,
            Error::Training(_) | Error::Precondition(_) => ErrorCategory::Training,
            _ => ErrorCategory::Data,
        }
    }
}
