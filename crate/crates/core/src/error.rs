use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    /// A caller broke a documented precondition (lengths, shapes, simplex).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rejected attack on {sensor}: |{value}| exceeds threshold {tau}")]
    ThresholdViolation { sensor: &'static str, value: f64, tau: f64 },

    #[error("rejected attack on {sensor}: sensor is not attackable in this scenario")]
    MaskViolation { sensor: &'static str },

    #[error("episode already terminated")]
    EpisodeTerminated,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config { field, reason: reason.into() }
    }
}
