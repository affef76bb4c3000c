use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("Gini coefficient undefined for a distribution with mean {mean}")]
    UndefinedGini { mean: f64 },

    #[error("income must be positive under this cost model (got {income})")]
    NonPositiveIncome { income: f64 },

    #[error(
        "alpha = {alpha} too large: ex-post income {income} at quantile {quantile} is negative"
    )]
    AlphaTooLarge {
        alpha: f64,
        quantile: f64,
        income: f64,
    },

    #[error("ex-post incomes are not order preserving near quantile {quantile}")]
    OrderViolation { quantile: f64 },

    #[error(
        "equilibrium solver did not converge after {iterations} sweeps (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
