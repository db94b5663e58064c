use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Wire(#[from] prs_wire::WireError),
    #[error(transparent)]
    Mpc(prs_mpc::MpcError),
    #[error(transparent)]
    He(#[from] prs_he::HeError),
    #[error(transparent)]
    Model(#[from] prs_core::Error),
    #[error("client {client} is at generation {current}, request names {got}")]
    Generation { client: u32, current: u64, got: u64 },
    #[error("client {client} generation {generation} is already set up")]
    DuplicateSetup { client: u32, generation: u64 },
    #[error("no distributed model for client {0}")]
    UnknownClient(u32),
    #[error("item {0} is not in the client's model")]
    UnknownItem(u32),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("state audit failed: {0}")]
    Audit(String),
}

impl From<prs_mpc::MpcError> for ProtocolError {
    fn from(e: prs_mpc::MpcError) -> Self {
        // Wire failures inside a GC run surface as wire errors.
        match e {
            prs_mpc::MpcError::Wire(w) => Self::Wire(w),
            other => Self::Mpc(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, ProtocolError>;
