//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("graph size {got} exceeds cap {cap}")]
    SizeCap { got: usize, cap: usize },
    #[error("envelope violated at t={t}: rate {rate} > bound {bound} (vertex {vertex}, state {state})")]
    EnvelopeViolation {
        t: f64,
        rate: f64,
        bound: f64,
        vertex: usize,
        state: u8,
    },
    #[error("event cap {cap} exceeded")]
    EventCap { cap: usize },
    #[error("non-finite value at step {step} (vertex {vertex})")]
    NonFinite { step: usize, vertex: usize },
    #[error("simplex violation {violation:.3e} at t={t}: reduce dt")]
    SimplexViolation { t: f64, violation: f64 },
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
