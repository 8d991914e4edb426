use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} lies outside [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },

    /// The feedback gain, `beta_inf` and the drift offset all diverge at the horizon.
    #[error("evaluation at the horizon pole t = {t}")]
    Pole { t: f64 },

    #[error(
        "inadmissible strategy: terminal position {terminal} under an infinite terminal penalty"
    )]
    Inadmissible { terminal: f64 },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(
        "boundary-value system is ill-conditioned at t = {t} (condition estimate {condition:e})"
    )]
    IllConditioned { t: f64, condition: f64 },

    #[error("matrix exponential overflowed (1-norm of argument {norm:e})")]
    Overflow { norm: f64 },

    #[error("value matrix lost positive definiteness at step {step}")]
    NotPositiveDefinite { step: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
