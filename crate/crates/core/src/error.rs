use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported order {order}: {what} supports {supported}")]
    UnsupportedOrder {
        what: &'static str,
        order: usize,
        supported: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ill-conditioned moment system (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("pole at z = 1 in e_n(z)")]
    Pole,

    #[error("out-of-order push: expected index {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },

    #[error("history capacity exceeded: horizon is {horizon}, requested index {index}")]
    Capacity { horizon: usize, index: usize },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("zero pivot: {0}")]
    ZeroPivot(String),

    #[error("numerical instability detected at step {step}")]
    Unstable { step: usize },

    #[error("nonlinear iteration did not converge at step {step} after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
