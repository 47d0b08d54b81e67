//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the base space")]
    PointOutsideSpace { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operands live on different base spaces")]
    SpaceMismatch,

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("field leaves the unit ball: sup|h| = {sup:.6} at {witness:?}")]
    GammaViolation { sup: f64, witness: Vec<f64> },

    #[error("iterated-integral expansion of {tuples} tuples exceeds the hard cap {cap}")]
    ExpansionTooLarge { tuples: u128, cap: u128 },

    #[error("step underflow: schedule reached {step:.3e}")]
    StepUnderflow { step: f64 },

    #[error("direction measure has zero total variation")]
    ZeroDirection,

    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("family cannot be serialized: {0}")]
    NotSerializable(&'static str),
}

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
