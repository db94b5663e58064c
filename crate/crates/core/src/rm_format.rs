//! `PRSM` binary encoding of a recommendation model.
//!
//! Little-endian: magic, `u16` version, `u32` target, `u16` k, `u32` entry
//! count, then per entry the `u32` item and `k` pairs of `u32` neighbor and
//! `u16` rating. Generation counters are bookkeeping and are not encoded.

use crate::error::{Error, Result};
use crate::reuse_knn::{RecommendationModel, RmEntry};

const MAGIC: &[u8; 4] = b"PRSM";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

pub fn serialize_rm(rm: &RecommendationModel) -> Vec<u8> {
    let k = rm.k as usize;
    let mut out = Vec::with_capacity(HEADER_LEN + rm.entries.len() * (4 + 6 * k) + 6);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rm.target.to_le_bytes());
    out.extend_from_slice(&rm.k.to_le_bytes());
    out.extend_from_slice(&(rm.entries.len() as u32).to_le_bytes());
    for e in &rm.entries {
        out.extend_from_slice(&e.item.to_le_bytes());
        for (n, r) in e.neighbors.iter().zip(&e.ratings) {
            out.extend_from_slice(&n.to_le_bytes());
            out.extend_from_slice(&r.to_le_bytes());
        }
    }
    out.extend_from_slice(&rm.pad_neighbor.to_le_bytes());
    out.extend_from_slice(&rm.pad_rating.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Format("truncated PRSM".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn deserialize_rm(bytes: &[u8]) -> Result<RecommendationModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a PRSM blob".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PRSM version {version}")));
    }
    let target = r.u32()?;
    let k = r.u16()?;
    let count = r.u32()? as usize;
    let expected = HEADER_LEN + count * (4 + 6 * k as usize) + 6;
    if bytes.len() != expected {
        return Err(Error::Format(format!("PRSM length {} does not match header ({expected})", bytes.len())));
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let item = r.u32()?;
        let mut neighbors = Vec::with_capacity(k as usize);
        let mut ratings = Vec::with_capacity(k as usize);
        for _ in 0..k {
            neighbors.push(r.u32()?);
            ratings.push(r.u16()?);
        }
        entries.push(RmEntry { item, neighbors, ratings });
    }
    if entries.windows(2).any(|w| w[0].item >= w[1].item) {
        return Err(Error::Format("PRSM entries out of order".into()));
    }
    let pad_neighbor = r.u32()?;
    let pad_rating = r.u16()?;
    Ok(RecommendationModel { target, k, entries, generation: 0, dataset_generation: 0, pad_neighbor, pad_rating })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejects() {
        let rm = RecommendationModel {
            target: 4,
            k: 2,
            entries: vec![
                RmEntry { item: 1, neighbors: vec![0, 9], ratings: vec![3, 2] },
                RmEntry { item: 5, neighbors: vec![2, 3], ratings: vec![0, 4] },
            ],
            generation: 0,
            dataset_generation: 0,
            pad_neighbor: 9,
            pad_rating: 2,
        };
        let b = serialize_rm(&rm);
        assert_eq!(b.len(), 16 + 2 * 16 + 6);
        assert_eq!(deserialize_rm(&b).unwrap(), rm);
        assert!(deserialize_rm(&b[..b.len() - 1]).is_err());
        assert!(deserialize_rm(b"PRSX").is_err());
    }
}
