//! Framed message transport with per-phase metering.
//!
//! Every message travels as one frame:
//!
//! ```text
//! +----------------+--------+-------------+-----------------+
//! | length: u32 BE | type   | phase: u16  | payload         |
//! | payload bytes  | 1 byte | BE          | `length` bytes  |
//! +----------------+--------+-------------+-----------------+
//! ```
//!
//! Message types are listed on [`MsgType`]. Phases are opaque `u16` codes
//! owned by the caller; a [`Metered`] endpoint only checks that they never
//! go backwards and that both sides agree on the current one.

mod channel;
mod error;
mod frame;
mod meter;

pub use channel::{loopback_pair, Channel, Counters, Loopback, TcpChannel};
pub use error::{Result, WireError};
pub use frame::{Frame, MsgType, HEADER_LEN, MAX_PAYLOAD};
pub use meter::{peak_rss_kb, Direction, Entry, Link, MeterReport, Metered, PhaseReport, Transcript};
