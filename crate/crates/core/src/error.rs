use thiserror::Error;

/// Errors raised by the channel model, solvers and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("contention never succeeds: {0}")]
    NonTerminatingContention(String),

    #[error("root finding failed for {equation}: {reason} (bracket [{lo}, {hi}], {iterations} iterations)")]
    SolverFailure {
        equation: &'static str,
        reason: String,
        lo: f64,
        hi: f64,
        iterations: usize,
    },

    #[error("policy {policy} cannot be used for {operation}")]
    InvalidPolicy {
        policy: &'static str,
        operation: &'static str,
    },

    #[error("packet {packet}: {layer} layer exceeded {cap} observations without stopping")]
    ObservationCap {
        packet: usize,
        layer: &'static str,
        cap: u64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
