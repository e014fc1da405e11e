use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of numeric range: {0}")]
    ParameterRange(String),

    #[error("not real-diagonalizable: {0}")]
    NotDiagonalizable(String),

    #[error("eigendecomposition failed: {0}")]
    Eigendecomposition(String),

    #[error("time {t} outside the horizon [0, {horizon}]")]
    TimeDomain { t: f64, horizon: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("covariance not PD: {0}")]
    NotPositiveDefinite(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("τ produces invalid CPM: {0}")]
    InvalidCpm(String),

    #[error("null class empty over box")]
    EmptyNullClass,

    #[error("alternative construction failed: {0}")]
    AlternativeFailed(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ParameterRange(_)
                | Error::NotDiagonalizable(_)
                | Error::Eigendecomposition(_)
                | Error::Invariant(_)
                | Error::NotPositiveDefinite(_)
                | Error::InvalidCpm(_)
                | Error::EmptyNullClass
                | Error::AlternativeFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
