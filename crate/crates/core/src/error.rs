use thiserror::Error;

use crate::pauli::Basis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame size mismatch: {left} vs {right} qubits")]
    SizeMismatch { left: usize, right: usize },

    #[error("qubit {qubit} out of range for a {len}-qubit frame")]
    QubitOutOfRange { qubit: usize, len: usize },

    #[error("structural error: {0}")]
    Structural(String),

    /// A nontrivial syndrome arrived while every candidate flag was still
    /// infinite. Means an error occurred at a location that raised no flag.
    #[error("decoder inconsistency at level {level} ({basis:?} basis): syndrome 1 with no finite flag")]
    Inconsistency { level: u8, basis: Basis },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exhaustive budget exceeded: {needed} assignments > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
