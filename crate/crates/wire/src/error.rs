use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("peer disconnected")]
    Disconnected,
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the frame limit")]
    Oversized(usize),
    #[error("truncated frame")]
    Truncated,
    #[error("expected {expected:?} in phase {phase}, got {got:?} in phase {got_phase}")]
    Desync { expected: super::MsgType, phase: u16, got: super::MsgType, got_phase: u16 },
    #[error("phase {next} entered after phase {current}")]
    PhaseOrder { current: u16, next: u16 },
    #[error("peer aborted: {0}")]
    Aborted(String),
}

pub type Result<T> = std::result::Result<T, WireError>;
