use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),

    #[error("class {0} has no samples")]
    EmptyClass(i64),

    #[error("class {0} is not present in the data")]
    MissingClass(i64),

    #[error("unknown example design {0} (expected 1, 2 or 3)")]
    UnknownExample(u32),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("block covariance starting at feature {0} is not positive definite")]
    NonPositiveDefiniteBlock(usize),

    #[error("column {column} is not standardized (sd = {sd})")]
    NotStandardized { column: usize, sd: f64 },

    #[error("memory budget of {budget} bytes cannot hold a single correlation tile ({needed} bytes)")]
    BudgetTooSmall { budget: usize, needed: usize },

    #[error("precision block of component {} is singular even after ridge retries", .0 + 1)]
    SingularBlock(usize),

    #[error("no features were selected")]
    EmptySelection,

    #[error("fold {fold} has no samples of class {class}")]
    FoldTooSmall { fold: usize, class: i64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} is outside the open interval (0, 1)")]
    Domain(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
