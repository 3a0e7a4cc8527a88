use thiserror::Error;

/// Errors produced by the testing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("value out of range at index {index}: {msg}")]
    OutOfRange { index: usize, msg: String },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("level {alpha} is not attainable; attainable levels lie in ({lo}, {hi})")]
    Unattainable { alpha: f64, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
