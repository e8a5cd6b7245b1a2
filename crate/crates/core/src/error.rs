use thiserror::Error;

/// Errors raised by the model, tradeoff and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdlError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("conditioning block is singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularConditioning { min_eigenvalue: f64 },

    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    FactorizationFailure { min_eigenvalue: f64 },

    #[error("distortion {requested} for {target} is below the attainable minimum {minimum}")]
    InfeasibleDistortion {
        target: &'static str,
        requested: f64,
        minimum: f64,
    },

    #[error("invalid index set: {0}")]
    InvalidIndex(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, RdlError>;
