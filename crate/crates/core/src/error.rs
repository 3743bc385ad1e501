use thiserror::Error;

/// Unified error type for the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("ensemble contains no realizations")]
    EmptyEnsemble,

    #[error("ensemble has {n} realizations; at least {need} required")]
    TooFewRealizations { n: usize, need: usize },

    #[error(
        "matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:.3e} exceeds {tol:.3e}"
    )]
    NotSymmetric { i: usize, j: usize, diff: f64, tol: f64 },

    #[error(
        "eigensolver did not converge within {iterations} iterations \
         (off-diagonal residual {residual:.3e})"
    )]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("model dimension m = {m} out of range [1, {max}] for d = {d}")]
    InvalidRetainedDim { m: usize, max: usize, d: usize },

    #[error("retained eigenvalue {index} is not positive ({value:.3e}); data rank is too low")]
    DegenerateSpectrum { index: usize, value: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("model file declares format_version {found}; this build reads version {supported}")]
    UnsupportedFormatVersion { found: u32, supported: u32 },

    #[error("model document rejected: {0}")]
    CorruptModel(String),

    #[error("malformed data file: {0}")]
    MalformedData(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
