use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("privacy budget exceeded: requested {requested}, remaining {remaining}")]
    BudgetExceeded { requested: f64, remaining: f64 },

    #[error("exponential mechanism called with no candidates")]
    EmptyCandidates,

    #[error("neighbor enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("unknown label {label:?} at row {row}")]
    UnknownLabel { row: usize, label: String },

    #[error("class {label} has {count} examples, fewer than {k} folds")]
    ClassTooSmall { label: i8, count: usize, k: usize },

    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unmatched grid: {0}")]
    UnmatchedGrid(String),

    #[error("model format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
