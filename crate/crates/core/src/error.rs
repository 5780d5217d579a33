use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WplError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A covariate column has zero spread, so no bandwidth can be derived from it.
    /// Callers can fall back to covariate-free weighting.
    #[error("degenerate covariate: {0}")]
    DegenerateCovariate(String),

    #[error("numerical failure at sweep {sweep}: {reason}")]
    NumericalFailure { sweep: usize, reason: String },

    #[error("hyperparameter selection failed: {0}")]
    SelectionFailure(String),

    #[error("regression failed for anchor {anchor}, response {response}: {source}")]
    Regression {
        anchor: usize,
        response: usize,
        #[source]
        source: Box<WplError>,
    },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
}

pub type Result<T> = std::result::Result<T, WplError>;

pub(crate) fn invalid(msg: impl Into<String>) -> WplError {
    WplError::InvalidArgument(msg.into())
}
