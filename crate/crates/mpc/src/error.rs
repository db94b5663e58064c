use prs_wire::WireError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("peer built a different circuit")]
    CircuitMismatch,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Wire(#[from] WireError),
}

pub type Result<T> = std::result::Result<T, MpcError>;
