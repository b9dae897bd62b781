use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left} vs {right} in {context}")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: String,
    },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("numerical failure in {what} after {iterations} iterations")]
    NumericalFailure { what: String, iterations: usize },

    #[error("lambda is not a regular value (smallest singular value of I - lambda*T is {sigma_min:.3e})")]
    NotRegular { sigma_min: f64 },

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("smoothing plan infeasible: minimal achievable budget {min_budget:.6} exceeds 2")]
    PlanInfeasible { min_budget: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dims(left: usize, right: usize, context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            left,
            right,
            context: context.into(),
        }
    }
}
