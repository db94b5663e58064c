//! Semi-honest two-party garbled circuits between a garbling cloud and an
//! evaluating client, with oblivious transfer and the circuit library used
//! by the recommendation pipeline.

pub mod block;
pub mod builder;
pub mod circuit;
pub mod error;
pub mod gadgets;
pub mod garble;
pub mod kreyvium;
pub mod library;
pub mod ot;
pub mod session;

pub use builder::{Bit, Builder, Gates, Plain};
pub use circuit::{Circuit, Disclosure, Gate, GateKind, Output};
pub use error::{MpcError, Result};
pub use session::{EvaluatorSession, GarblerSession};
pub use library::{kreyvium_circuit, CandidateIds, PirSpec, PirUnmaskSpec, SharedWinner, StreamSource, TopkMode, TopkOutput, TopkSpec, UnmaskSpec};
