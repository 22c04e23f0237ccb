use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("invalid constraint id {id} for criterion {kind}")]
    InvalidConstraint { kind: String, id: usize },

    #[error("constraint {constraint}: group {group} is empty in the training sample")]
    ZeroGroupRate { constraint: String, group: &'static str },

    #[error("empty group list passed to the multiplier solver")]
    EmptyGroup,

    #[error("degenerate denominator {0:e} in label marginalization")]
    DegenerateDenominator(f64),

    #[error("model was trained with {trained}, which does not support {requested}")]
    CriterionMismatch { trained: String, requested: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("bad value `{value}` at row {row}, column `{column}`")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("no data rows in {0}")]
    EmptyFile(PathBuf),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("incompatible model file: {0}")]
    IncompatibleModel(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data or files rather than the math.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::BadValue { .. }
                | Error::EmptyFile(_)
                | Error::Schema(_)
                | Error::IncompatibleModel(_)
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
