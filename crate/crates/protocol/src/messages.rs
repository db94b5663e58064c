//! Payload encodings. All integers are little-endian.

use prs_core::SetsLayout;

use crate::error::{ProtocolError, Result};

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, what }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(ProtocolError::Malformed(format!("{} truncated", self.what)));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn lanes(&mut self, n: usize) -> Result<Vec<u16>> {
        Ok(self.take(2 * n)?.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    }

    pub fn finish(self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::Malformed(format!("{} has {} trailing bytes", self.what, self.bytes.len())))
        }
    }
}

pub fn lanes_to_bytes(lanes: &[u16]) -> Vec<u8> {
    lanes.iter().flat_map(|l| l.to_le_bytes()).collect()
}

pub fn bytes_to_lanes(bytes: &[u8]) -> Result<Vec<u16>> {
    if bytes.len() % 2 != 0 {
        return Err(ProtocolError::Malformed("odd lane byte count".into()));
    }
    Reader::new(bytes, "lanes").lanes(bytes.len() / 2)
}

pub const LAYOUT_LEN: usize = 14;

pub fn encode_layout(l: &SetsLayout, out: &mut Vec<u8>) {
    out.extend_from_slice(&l.k.to_le_bytes());
    out.extend_from_slice(&l.capacity.to_le_bytes());
    out.extend_from_slice(&l.num_clusters.to_le_bytes());
    out.extend_from_slice(&l.stash_size.to_le_bytes());
}

pub(crate) fn decode_layout(r: &mut Reader) -> Result<SetsLayout> {
    let l = SetsLayout { k: r.u16()?, capacity: r.u32()?, num_clusters: r.u32()?, stash_size: r.u32()? };
    if l.k == 0 || l.num_clusters as u64 + l.stash_size as u64 == 0 {
        return Err(ProtocolError::Malformed(format!("degenerate layout {l:?}")));
    }
    if l.num_clusters > 0 && l.capacity == 0 {
        return Err(ProtocolError::Malformed("clusters without capacity".into()));
    }
    Ok(l)
}

/// Who learns the winners of the stash and cluster stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DisclosureMode {
    /// Only the final merged ids reach the client.
    #[default]
    FinalOnly,
    /// The client also learns each stage's winner ids in the clear.
    PerStage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryOptions {
    pub k_out: usize,
    /// Clusters retrieved per query.
    pub k_cl: usize,
    pub disclosure: DisclosureMode,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self { k_out: 10, k_cl: 3, disclosure: DisclosureMode::FinalOnly }
    }
}

/// First frame of every session.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hello {
    Setup { client: u32, generation: u64 },
    Query { client: u32, generation: u64, options: QueryOptions },
}

impl Hello {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18);
        match *self {
            Hello::Setup { client, generation } => {
                out.push(0);
                out.extend_from_slice(&client.to_le_bytes());
                out.extend_from_slice(&generation.to_le_bytes());
            }
            Hello::Query { client, generation, options } => {
                out.push(1);
                out.extend_from_slice(&client.to_le_bytes());
                out.extend_from_slice(&generation.to_le_bytes());
                out.extend_from_slice(&(options.k_out as u16).to_le_bytes());
                out.extend_from_slice(&(options.k_cl as u16).to_le_bytes());
                out.push(match options.disclosure {
                    DisclosureMode::FinalOnly => 0,
                    DisclosureMode::PerStage => 1,
                });
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "hello");
        let kind = r.u8()?;
        let client = r.u32()?;
        let generation = r.u64()?;
        let hello = match kind {
            0 => Hello::Setup { client, generation },
            1 => {
                let k_out = r.u16()? as usize;
                let k_cl = r.u16()? as usize;
                let disclosure = match r.u8()? {
                    0 => DisclosureMode::FinalOnly,
                    1 => DisclosureMode::PerStage,
                    d => return Err(ProtocolError::Malformed(format!("disclosure mode {d}"))),
                };
                if k_out == 0 {
                    return Err(ProtocolError::Invalid("k_out must be positive".into()));
                }
                Hello::Query { client, generation, options: QueryOptions { k_out, k_cl, disclosure } }
            }
            k => return Err(ProtocolError::Malformed(format!("hello kind {k}"))),
        };
        r.finish()?;
        Ok(hello)
    }
}

/// A rating the client reports back to the data owner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Feedback {
    pub client: u32,
    pub generation: u64,
    pub item: u32,
    pub rating: u16,
}

impl Feedback {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18);
        out.extend_from_slice(&self.client.to_le_bytes());
        out.extend_from_slice(&self.generation.to_le_bytes());
        out.extend_from_slice(&self.item.to_le_bytes());
        out.extend_from_slice(&self.rating.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "feedback");
        let fb = Self { client: r.u32()?, generation: r.u64()?, item: r.u32()?, rating: r.u16()? };
        r.finish()?;
        Ok(fb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hello_round_trip() {
        let options = QueryOptions { k_out: 7, k_cl: 2, disclosure: DisclosureMode::PerStage };
        for h in [Hello::Setup { client: 3, generation: 9 }, Hello::Query { client: 1, generation: 2, options }] {
            assert_eq!(Hello::decode(&h.encode()).unwrap(), h);
        }
        assert!(Hello::decode(&[2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]).is_err());
    }

    #[test]
    fn layout_round_trip() {
        let l = SetsLayout { k: 3, capacity: 64, num_clusters: 12, stash_size: 5 };
        let mut b = Vec::new();
        encode_layout(&l, &mut b);
        assert_eq!(b.len(), LAYOUT_LEN);
        assert_eq!(decode_layout(&mut Reader::new(&b, "layout")).unwrap(), l);
    }
}
