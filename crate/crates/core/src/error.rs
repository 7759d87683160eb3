use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(String),

    /// A node collapsed (or went non-finite) before renormalization.
    #[error("step failure at t = {time}{}: {reason}", seed.map(|s| format!(" (seed {s})")).unwrap_or_default())]
    StepFailure {
        time: f64,
        seed: Option<u64>,
        reason: String,
    },

    #[error("measurement failure: {0}")]
    MeasurementFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
