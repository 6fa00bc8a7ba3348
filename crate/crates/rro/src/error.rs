//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {why}")]
    InvalidSpec { what: &'static str, why: String },

    #[error("{what} must lie in {range}, got {value}")]
    Domain {
        what: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("empty sample set given to {0}")]
    EmptySample(&'static str),

    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("all sample points identical: Silverman bandwidth undefined, use a fixed bandwidth")]
    DegenerateBandwidth,

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("missing gradient tape: {0}")]
    MissingTape(&'static str),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {what}: {why}")]
    Parse { what: String, why: String },
}
