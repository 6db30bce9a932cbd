use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A data file could not be parsed; names the offending record and field.
    #[error("parse error in {source_name}, record {record}: field `{field}`: {message}")]
    Parse {
        source_name: String,
        record: String,
        field: String,
        message: String,
    },
    /// A data file parsed but violates an integrity rule (counts, invariants).
    #[error("integrity error in {source_name}: {message}")]
    Integrity { source_name: String, message: String },
    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A propagation model was asked for a distance below its validity floor.
    #[error("distance {distance_m} m is below the model validity floor of {floor_m} m")]
    BelowValidityFloor { distance_m: f64, floor_m: f64 },
    /// Carrier frequency outside the supported range.
    #[error("carrier frequency {fc_hz} Hz outside supported range [{lo_hz}, {hi_hz}] Hz")]
    FrequencyOutOfRange { fc_hz: f64, lo_hz: f64, hi_hz: f64 },
    /// Sequence lengths disagree.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    /// Invalid configuration value.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
