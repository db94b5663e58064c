//! Circuits used by the recommendation pipeline.
//!
//! Arithmetic shares follow one convention throughout: a 16-bit value `v` is
//! held as a client share `c` and a cloud share `s` with `v = c - s mod 2^16`.
//! Circuits that hand the client a fresh share take a mask `r` from the cloud
//! and output `v - r`; the cloud's share is then `-r`.

use crate::builder::{Bit, Builder, Gates};
use crate::circuit::{bits_to_lanes, bytes_to_bits_msb, lanes_to_bits, Circuit, Disclosure};
use crate::error::{MpcError, Result};
use crate::gadgets::{constant_word, equal, index_bits, less_than, mux_tree, mux_word, sub, xor_word};
use crate::kreyvium::kreyvium_bits;

/// Item lane marking a padding record.
pub const INVALID_ID: u16 = 0xFFFF;

/// The cloud's share matching a mask `r` handed to the client as `v - r`.
pub fn cloud_share(mask: u16) -> u16 {
    mask.wrapping_neg()
}

fn lanes_in(bits: &[Bit]) -> Vec<&[Bit]> {
    bits.chunks(16).collect()
}

/// Converts 16 keystream bits (stream order) to a little-endian lane word.
fn stream_lane(bits: &[Bit]) -> Vec<Bit> {
    bits.iter().rev().copied().collect()
}

fn key_bits(key: &[u8; 16]) -> Vec<bool> {
    bytes_to_bits_msb(key)
}

fn iv_consts(b: &mut Builder, iv: &[u8; 16]) -> Vec<Bit> {
    key_bits(iv).into_iter().map(|v| b.constant(v)).collect()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(MpcError::InvalidParam(msg()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopkMode {
    /// Winner ids go to the client in the clear.
    Final,
    /// Winners stay secret shared as (distance, id) pairs.
    Reshare,
    /// Both: clear ids to the client plus shared pairs for a later merge.
    Disclose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateIds {
    /// Candidate `i` is identified by its position.
    Public,
    /// Ids arrive as shares; [`INVALID_ID`] marks padding that never wins
    /// over a real candidate.
    Shared,
}

/// Selection of the `k_out` smallest shared distances by repeated minimum
/// extraction. Ties go to the lower id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TopkSpec {
    pub n: usize,
    pub k_out: usize,
    pub mode: TopkMode,
    pub ids: CandidateIds,
}

/// A shared (distance, id) winner from the client's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharedWinner {
    pub distance: u16,
    pub id: u16,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TopkOutput {
    pub ids: Vec<u16>,
    pub shared: Vec<SharedWinner>,
}

impl TopkSpec {
    pub fn new(n: usize, k_out: usize, mode: TopkMode, ids: CandidateIds) -> Result<Self> {
        check(n >= 1, || "top-k needs at least one candidate".into())?;
        check(k_out >= 1 && k_out <= n, || format!("k_out = {k_out} outside 1..={n}"))?;
        check(n < INVALID_ID as usize, || format!("{n} candidates exceed the id space"))?;
        Ok(Self { n, k_out, mode, ids })
    }

    fn id_lanes(&self) -> usize {
        if self.ids == CandidateIds::Shared {
            self.n
        } else {
            0
        }
    }

    fn reshares(&self) -> bool {
        self.mode != TopkMode::Final
    }

    pub fn client_input_len(&self) -> usize {
        16 * (self.n + self.id_lanes())
    }

    pub fn cloud_input_len(&self) -> usize {
        16 * (self.n + self.id_lanes()) + if self.reshares() { 32 * self.k_out } else { 0 }
    }

    /// Client inputs: distance shares, then id shares when ids are shared.
    pub fn client_inputs(&self, distances: &[u16], ids: &[u16]) -> Result<Vec<bool>> {
        self.check_lanes(distances, ids)?;
        Ok(lanes_to_bits(&[distances, ids].concat()))
    }

    /// Cloud inputs: distance shares, id shares, then `(distance, id)` masks
    /// per output slot when winners are reshared.
    pub fn cloud_inputs(&self, distances: &[u16], ids: &[u16], masks: &[(u16, u16)]) -> Result<Vec<bool>> {
        self.check_lanes(distances, ids)?;
        let want = if self.reshares() { self.k_out } else { 0 };
        check(masks.len() == want, || format!("{} masks for {want} reshared slots", masks.len()))?;
        let flat: Vec<u16> = masks.iter().flat_map(|&(d, i)| [d, i]).collect();
        Ok(lanes_to_bits(&[distances, ids, &flat].concat()))
    }

    fn check_lanes(&self, distances: &[u16], ids: &[u16]) -> Result<()> {
        check(distances.len() == self.n, || format!("{} distances for {} candidates", distances.len(), self.n))?;
        check(ids.len() == self.id_lanes(), || format!("{} ids, expected {}", ids.len(), self.id_lanes()))
    }

    pub fn circuit(&self) -> Circuit {
        let mut b = Builder::new(self.cloud_input_len(), self.client_input_len());
        let client = b.evaluator_inputs();
        let cloud = b.garbler_inputs();
        let n = self.n;
        let shared_ids = self.ids == CandidateIds::Shared;
        let invalid = constant_word(&mut b, INVALID_ID as u64, 16);

        // key = id (low 16) | distance (16) | excluded flag (top bit)
        let mut ids = Vec::with_capacity(n);
        let mut keys = Vec::with_capacity(n);
        let mut excluded = Vec::with_capacity(n);
        for i in 0..n {
            let d = sub(&mut b, &client[16 * i..16 * i + 16], &cloud[16 * i..16 * i + 16]);
            let (id, flag) = if shared_ids {
                let off = 16 * (n + i);
                let id = sub(&mut b, &client[off..off + 16], &cloud[off..off + 16]);
                let pad = equal(&mut b, &id, &invalid);
                (id, pad)
            } else {
                (constant_word(&mut b, i as u64, 16), b.constant(false))
            };
            let mut key = id.clone();
            key.extend_from_slice(&d);
            keys.push(key);
            ids.push(id);
            excluded.push(flag);
        }
        let masks_at = 16 * (n + self.id_lanes());

        for slot in 0..self.k_out {
            let full = |keys: &[Vec<Bit>], excluded: &[Bit], i: usize| {
                let mut k = keys[i].clone();
                k.push(excluded[i]);
                k
            };
            let mut best = full(&keys, &excluded, 0);
            for i in 1..n {
                let cand = full(&keys, &excluded, i);
                let lt = less_than(&mut b, &cand, &best);
                best = mux_word(&mut b, lt, &best, &cand);
            }
            let win_id = best[..16].to_vec();
            let win_dist = best[16..32].to_vec();
            if self.mode != TopkMode::Reshare {
                b.output(&win_id, Disclosure::ToClient);
            }
            if self.reshares() {
                let m = masks_at + 32 * slot;
                let d = sub(&mut b, &win_dist, &cloud[m..m + 16]);
                let id = sub(&mut b, &win_id, &cloud[m + 16..m + 32]);
                b.output(&d, Disclosure::ToClient);
                b.output(&id, Disclosure::ToClient);
            }
            if slot + 1 < self.k_out {
                for i in 0..n {
                    let hit = equal(&mut b, &ids[i], &win_id);
                    excluded[i] = b.or(excluded[i], hit);
                }
            }
        }
        b.finish()
    }

    pub fn decode(&self, client_bits: &[bool]) -> Result<TopkOutput> {
        let per_slot = match self.mode {
            TopkMode::Final => 16,
            TopkMode::Reshare => 32,
            TopkMode::Disclose => 48,
        };
        check(client_bits.len() == per_slot * self.k_out, || format!("{} output bits", client_bits.len()))?;
        let lanes = bits_to_lanes(client_bits);
        let mut out = TopkOutput::default();
        for slot in lanes.chunks(per_slot / 16) {
            match self.mode {
                TopkMode::Final => out.ids.push(slot[0]),
                TopkMode::Reshare => out.shared.push(SharedWinner { distance: slot[0], id: slot[1] }),
                TopkMode::Disclose => {
                    out.ids.push(slot[0]);
                    out.shared.push(SharedWinner { distance: slot[1], id: slot[2] });
                }
            }
        }
        Ok(out)
    }
}

/// Bare keystream circuit: key from the cloud, IV from the client, stream
/// to the client.
pub fn kreyvium_circuit(bits: usize) -> Result<Circuit> {
    check(bits >= 1, || "empty keystream".into())?;
    let mut b = Builder::new(128, 128);
    let key = b.garbler_inputs();
    let iv = b.evaluator_inputs();
    let stream = kreyvium_bits(&mut b, &key, &iv, bits);
    b.output(&stream, Disclosure::ToClient);
    Ok(b.finish())
}

/// Source of the data keystream inside [`UnmaskSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamSource {
    Kreyvium,
    /// Test hook: an all-zero stream.
    Zero,
}

/// Converts lanes masked under `k_c` into fresh shares. The client supplies
/// `k_c ^ Kreyvium(k_p, iv_key)` and the masked lanes; the cloud supplies
/// `k_p` and one mask per lane. The client learns `v - r` per lane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnmaskSpec {
    pub lanes: usize,
    pub iv_key: [u8; 16],
    pub iv_data: [u8; 16],
    pub stream: StreamSource,
}

impl UnmaskSpec {
    pub fn new(lanes: usize, iv_key: [u8; 16], iv_data: [u8; 16]) -> Result<Self> {
        check(lanes >= 1, || "nothing to unmask".into())?;
        Ok(Self { lanes, iv_key, iv_data, stream: StreamSource::Kreyvium })
    }

    pub fn client_inputs(&self, masked_key: &[u8; 16], masked: &[u16]) -> Result<Vec<bool>> {
        check(masked.len() == self.lanes, || format!("{} lanes, expected {}", masked.len(), self.lanes))?;
        let mut bits = key_bits(masked_key);
        bits.extend(lanes_to_bits(masked));
        Ok(bits)
    }

    pub fn cloud_inputs(&self, primary_key: &[u8; 16], masks: &[u16]) -> Result<Vec<bool>> {
        check(masks.len() == self.lanes, || format!("{} masks, expected {}", masks.len(), self.lanes))?;
        let mut bits = key_bits(primary_key);
        bits.extend(lanes_to_bits(masks));
        Ok(bits)
    }

    pub fn circuit(&self) -> Circuit {
        let bits = 16 * self.lanes;
        let mut b = Builder::new(128 + bits, 128 + bits);
        let client = b.evaluator_inputs();
        let cloud = b.garbler_inputs();
        let stream = match self.stream {
            StreamSource::Kreyvium => {
                let iv_key = iv_consts(&mut b, &self.iv_key);
                let pad = kreyvium_bits(&mut b, &cloud[..128], &iv_key, 128);
                let client_key = xor_word(&mut b, &client[..128], &pad);
                let iv_data = iv_consts(&mut b, &self.iv_data);
                kreyvium_bits(&mut b, &client_key, &iv_data, bits)
            }
            StreamSource::Zero => vec![Bit::Const(false); bits],
        };
        unmask_lanes(&mut b, &client[128..], &cloud[128..], &stream);
        b.finish()
    }
}

fn unmask_lanes(b: &mut Builder, masked: &[Bit], masks: &[Bit], stream: &[Bit]) {
    for ((m, r), s) in lanes_in(masked).into_iter().zip(lanes_in(masks)).zip(stream.chunks(16)) {
        let s = stream_lane(s);
        let v = xor_word(b, m, &s);
        let out = sub(b, &v, r);
        b.output(&out, Disclosure::ToClient);
    }
}

/// Keystream for a privately chosen cluster: the client supplies the index,
/// the cloud every cluster's subkey.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PirSpec {
    pub clusters: usize,
    pub bits: usize,
    pub iv: [u8; 16],
}

impl PirSpec {
    pub fn new(clusters: usize, bits: usize, iv: [u8; 16]) -> Result<Self> {
        check(clusters >= 1, || "no clusters".into())?;
        check(bits >= 1, || "empty keystream".into())?;
        Ok(Self { clusters, bits, iv })
    }

    pub fn index_bits(&self) -> usize {
        index_bits(self.clusters)
    }

    pub fn client_inputs(&self, index: usize) -> Result<Vec<bool>> {
        check(index < self.clusters, || format!("cluster {index} of {}", self.clusters))?;
        Ok((0..self.index_bits()).map(|i| (index >> i) & 1 == 1).collect())
    }

    pub fn cloud_inputs(&self, subkeys: &[[u8; 16]]) -> Result<Vec<bool>> {
        check(subkeys.len() == self.clusters, || format!("{} subkeys for {} clusters", subkeys.len(), self.clusters))?;
        Ok(subkeys.iter().flat_map(key_bits).collect())
    }

    fn selected_stream(&self, b: &mut Builder, index: &[Bit], subkeys: &[Bit], bits: usize) -> Vec<Bit> {
        let options: Vec<Vec<Bit>> = subkeys.chunks(128).map(<[Bit]>::to_vec).collect();
        let key = mux_tree(b, index, &options);
        let iv = iv_consts(b, &self.iv);
        kreyvium_bits(b, &key, &iv, bits)
    }

    /// Outputs the selected cluster's keystream to the client.
    pub fn circuit(&self) -> Circuit {
        let mut b = Builder::new(128 * self.clusters, self.index_bits());
        let index = b.evaluator_inputs();
        let subkeys = b.garbler_inputs();
        let stream = self.selected_stream(&mut b, &index, &subkeys, self.bits);
        b.output(&stream, Disclosure::ToClient);
        b.finish()
    }
}

/// PIR keystream fused with unmasking: the client also feeds the masked
/// lanes of its chosen cluster and receives `v - r` instead of the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PirUnmaskSpec {
    pub pir: PirSpec,
    pub lanes: usize,
}

impl PirUnmaskSpec {
    pub fn new(clusters: usize, lanes: usize, iv: [u8; 16]) -> Result<Self> {
        Ok(Self { pir: PirSpec::new(clusters, 16 * lanes, iv)?, lanes })
    }

    pub fn client_inputs(&self, index: usize, masked: &[u16]) -> Result<Vec<bool>> {
        check(masked.len() == self.lanes, || format!("{} lanes, expected {}", masked.len(), self.lanes))?;
        let mut bits = self.pir.client_inputs(index)?;
        bits.extend(lanes_to_bits(masked));
        Ok(bits)
    }

    pub fn cloud_inputs(&self, subkeys: &[[u8; 16]], masks: &[u16]) -> Result<Vec<bool>> {
        check(masks.len() == self.lanes, || format!("{} masks, expected {}", masks.len(), self.lanes))?;
        let mut bits = self.pir.cloud_inputs(subkeys)?;
        bits.extend(lanes_to_bits(masks));
        Ok(bits)
    }

    pub fn circuit(&self) -> Circuit {
        let ib = self.pir.index_bits();
        let kb = 128 * self.pir.clusters;
        let bits = 16 * self.lanes;
        let mut b = Builder::new(kb + bits, ib + bits);
        let client = b.evaluator_inputs();
        let cloud = b.garbler_inputs();
        let stream = self.pir.selected_stream(&mut b, &client[..ib], &cloud[..kb], bits);
        unmask_lanes(&mut b, &client[ib..], &cloud[kb..], &stream);
        b.finish()
    }
}
