//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, data handling, and sampling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {component}")]
    NonFinite { component: &'static str },

    #[error("log density is undefined for a fixed (point-mass) hyperprior")]
    FixedFamilyDensity,

    #[error("half-t hyperprior requires degrees of freedom")]
    MissingDegreesOfFreedom,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {0:?} is constant on the training split; cannot standardize")]
    ConstantColumn(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("target column {0:?} not found in CSV header")]
    MissingTargetColumn(String),

    #[error("classification targets must be coded 0/1; found {0} in row {1}")]
    NonBinaryTarget(f64, usize),

    #[error("CSV parse error at row {row}, column {column:?}: {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("Cholesky factorization failed even after jitter; matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("coordinate descent did not converge within {0} sweeps")]
    LassoNoConvergence(usize),

    #[error("could not find a finite initial point after {0} re-draws")]
    BadInitialPoint(usize),

    #[error("all transitions diverged in chain {0}")]
    AllDivergent(usize),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
