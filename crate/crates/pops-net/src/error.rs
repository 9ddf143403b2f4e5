//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in the simulator and its harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain (bad id, zero group
    /// count, probability outside [0,1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller-supplied input failed validation (e.g. a permutation file
    /// that is not a bijection).
    #[error("validation error: {0}")]
    Validation(String),

    /// A slot plan violated the per-processor send/listen contract.
    /// This is a caller bug, not a network event.
    #[error("slot plan contract violated: {0}")]
    PlanContract(String),

    /// The requested operation is not defined for this network shape.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    /// The literal five-slot protocol acknowledged a packet whose copy was
    /// then destroyed by a delivery conflict. Only possible when d > g.
    #[error("packet loss detected in step {step}: {lost} packet(s) acked but not delivered")]
    LossDetected { step: u32, lost: usize },

    /// An internal invariant of the engine failed. Always a bug.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    /// Process exit code used by the command-line front end:
    /// 1 validation, 2 invariant violation, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Validation(_)
            | Error::PlanContract(_)
            | Error::UnsupportedConfig(_) => 1,
            Error::LossDetected { .. } | Error::Invariant(_) => 2,
            Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
