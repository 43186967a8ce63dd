use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite real")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: unknown origin token `{value}` (expected `real` or `synthetic`)")]
    BadOrigin { row: usize, value: String },

    #[error("minority class is empty")]
    EmptyMinority,

    #[error("majority class is empty")]
    EmptyMajority,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("requested {requested} neighbors but only {available} points are available")]
    TooManyNeighbors { requested: usize, available: usize },

    #[error("need more than k = {k} minority points, have {n}")]
    TooFewMinority { n: usize, k: usize },

    #[error("k = {0} is not allowed here (k >= 3 required)")]
    KTooSmall(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("assumption check failed after {retries} resamples: {reason}")]
    AssumptionViolation { retries: usize, reason: String },

    #[error("only one class present")]
    SingleClass,
}

pub type Result<T> = std::result::Result<T, Error>;
