use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Fewer bound states than the two-level model requires.
    #[error("insufficient levels: {0}")]
    InsufficientLevels(String),

    /// A numerical procedure failed to converge or produced garbage.
    /// Carries a human-readable trace of what was attempted.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Norm drift beyond tolerance during propagation.
    #[error("norm drift {drift:.3e} exceeded tolerance at step {step} (t = {t})")]
    NormDrift { step: usize, t: f64, drift: f64 },

    /// Non-finite values appeared in the propagated field.
    #[error("NaN/Inf detected at step {step} (t = {t})")]
    NanDetected { step: usize, t: f64 },

    /// Query outside the stored time range or spatial domain.
    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
