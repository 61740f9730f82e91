use thiserror::Error;

/// Errors produced by the coexistence models and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value for {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("ITU channel {index} is outside the C band (accepted indices {min}..={max}, 1528-1568 nm)")]
    OutOfBand { index: i32, min: i32, max: i32 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-physical covariance matrix: {0}")]
    NonPhysical(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("baseline key rate is not positive ({key_bits_per_pulse:e} bits/pulse) before any channel is placed")]
    InfeasibleBaseline { key_bits_per_pulse: f64 },

    #[error("shot-noise calibration failed: {0}")]
    Calibration(String),

    #[error("cannot convert from {from} to {to} without conversion parameters")]
    ReferenceMismatch { from: &'static str, to: &'static str },

    #[error("unknown {kind} `{name}`; registered: {available}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("raman profile: {0}")]
    Profile(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}
