use thiserror::Error;

pub type Result<T> = std::result::Result<T, RevolveError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RevolveError {
    #[error("invalid dimension {0}: the sphere chart needs n >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid angle vector: {0}")]
    InvalidAngles(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The balance condition failed, so the `1/eps` term of the generator
    /// cannot be removed and no diffusion limit exists.
    #[error("balance condition violated: residual {residual:?} (norm {norm:.3e})")]
    Solvability { residual: Vec<f64>, norm: f64 },

    #[error("invalid value for `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("resource budget exhausted after {completed} of {requested} paths: {message}")]
    ResourceExhausted {
        completed: usize,
        requested: usize,
        message: String,
    },
}

impl RevolveError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        RevolveError::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}
