use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Non-finite input to an operation that requires finite values.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trajectory left the finite range of its arithmetic.
    #[error("trajectory diverged at step {step} (t = {t})")]
    Divergence { step: u64, t: f64 },

    /// A configuration value violates a constraint. `field` names the offending key.
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("variational limit did not converge within horizon {horizon}: residual {residual:e}")]
    NonConvergence { horizon: f64, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sweep failed: {0}")]
    Sweep(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
