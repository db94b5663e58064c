use std::io::Read;

use crate::error::{Result, WireError};

pub const HEADER_LEN: usize = 7;
/// Upper bound on a single payload; bulk data is chunked well below this.
pub const MAX_PAYLOAD: usize = 1 << 30;

macro_rules! msg_types {
    ($($(#[$doc:meta])* $name:ident = $code:literal,)*) => {
        /// Frame type codes.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        #[repr(u8)]
        pub enum MsgType {
            $($(#[$doc])* $name = $code,)*
        }

        impl MsgType {
            pub const ALL: &'static [MsgType] = &[$(MsgType::$name,)*];

            pub fn from_code(code: u8) -> Result<Self> {
                match code {
                    $($code => Ok(MsgType::$name),)*
                    other => Err(WireError::UnknownType(other)),
                }
            }
        }
    };
}

msg_types! {
    /// Session header: client id, generation and shape digests.
    Hello = 0x01,
    /// Public layout of a client's prepared sets.
    Layout = 0x02,
    /// Cloud to data owner: keystream for masking a client's sets.
    Keystream = 0x03,
    /// Data owner to client: masked sets and their checksum.
    MaskedSets = 0x04,
    /// Cloud to client: the client key masked under the primary key.
    MaskedKey = 0x05,
    /// Client to cloud: encrypted query blocks.
    HeQuery = 0x10,
    /// Cloud to client: masked encrypted distances.
    HeResult = 0x11,
    /// Garbler to evaluator: circuit digest and session tweak.
    GcHeader = 0x20,
    /// Garbler to evaluator: labels for the garbler's own inputs.
    GcGarblerLabels = 0x21,
    /// Garbler to evaluator: AND-gate tables in topological order.
    GcTables = 0x22,
    /// Garbler to evaluator: decode bits for client-visible outputs.
    GcDecode = 0x23,
    /// Evaluator to garbler: colour bits of cloud-visible outputs.
    GcOutputColors = 0x24,
    /// Base OT, first message.
    OtBaseSetup = 0x30,
    /// Base OT, second message.
    OtBaseReply = 0x31,
    /// OT extension correction matrix.
    OtExtMatrix = 0x32,
    /// OT extension payload pairs.
    OtExtPayload = 0x33,
    /// Client to data owner: rating feedback.
    Feedback = 0x40,
    /// Acknowledgement carrying a generation number.
    Ack = 0x41,
    /// Fatal error; the payload is a UTF-8 reason.
    Abort = 0x7f,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: MsgType,
    pub phase: u16,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: MsgType, phase: u16, payload: Vec<u8>) -> Self {
        Self { kind, phase, payload }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.phase.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::Truncated);
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        if bytes.len() != HEADER_LEN + len {
            return Err(WireError::Truncated);
        }
        let kind = MsgType::from_code(bytes[4])?;
        let phase = u16::from_be_bytes([bytes[5], bytes[6]]);
        Ok(Self { kind, phase, payload: bytes[HEADER_LEN..].to_vec() })
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        match r.read_exact(&mut header) {
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Err(WireError::Disconnected),
            other => other?,
        }
        let len = u32::from_be_bytes(header[..4].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(WireError::Oversized(len));
        }
        let kind = MsgType::from_code(header[4])?;
        let phase = u16::from_be_bytes([header[5], header[6]]);
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => WireError::Truncated,
            _ => WireError::Io(e),
        })?;
        Ok(Self { kind, phase, payload })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = Frame::new(MsgType::HeQuery, 0x0102, vec![9, 8, 7]);
        let b = f.encode();
        assert_eq!(b, [0, 0, 0, 3, 0x10, 1, 2, 9, 8, 7]);
        assert_eq!(Frame::decode(&b).unwrap(), f);
        assert_eq!(Frame::read_from(&mut &b[..]).unwrap(), f);
        assert!(matches!(Frame::decode(&b[..9]), Err(WireError::Truncated)));
    }

    #[test]
    fn type_codes_round_trip() {
        for &t in MsgType::ALL {
            assert_eq!(MsgType::from_code(t as u8).unwrap(), t);
        }
        assert!(matches!(MsgType::from_code(0xee), Err(WireError::UnknownType(0xee))));
    }
}
