use thiserror::Error;

/// Errors raised by tensor construction, truncation and time integration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("dense element budget exceeded: {requested} elements requested, budget is {budget}")]
    BudgetExceeded { requested: usize, budget: usize },

    #[error("dimension trees differ")]
    TreeMismatch,

    #[error("repeated singular values (gap {gap:e}); first-order SVD perturbation is undefined")]
    DegenerateSpectrum { gap: f64 },

    #[error("ill-conditioned coefficient matrix (smallest singular value {sigma_min:e})")]
    IllConditioned { sigma_min: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("steady state not reached after {steps} steps (last residual {residual:e})")]
    Timeout { steps: usize, residual: f64 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
