//! Pauli-frame simulation and flag-based decoding of a concatenated
//! [[4,1,2]] subsystem code CNOT extended rectangle.

pub mod cli;
pub mod code;
pub mod decoder;
pub mod engine;
pub mod error;
pub mod montecarlo;
pub mod pauli;

pub use error::{Error, Result};
