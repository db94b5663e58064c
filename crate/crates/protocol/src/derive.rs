//! Deterministic derivation of IVs, subkeys and RNG seeds.

use prs_core::SetsLayout;
use prs_mpc::kreyvium::{keystream_bytes, keystream_lanes};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Lanes per unmasking circuit; larger regions are split into chunks with
/// their own IVs.
pub const CHUNK_LANES: usize = 1024;

pub const IV_KEY: &str = "key";
pub const IV_SC: &str = "sc";
pub const IV_CLUSTER: &str = "cluster";
pub const IV_SUBKEY: &str = "subkey";

pub fn iv(domain: &str, client: u32, generation: u64, index: u64) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update(b"prs-iv");
    h.update((domain.len() as u8).to_le_bytes());
    h.update(domain.as_bytes());
    h.update(client.to_le_bytes());
    h.update(generation.to_le_bytes());
    h.update(index.to_le_bytes());
    h.finalize()[..16].try_into().unwrap()
}

/// Per-cluster PIR keys of one distributed generation.
pub fn cluster_subkeys(primary: &[u8; 16], client: u32, generation: u64, clusters: usize) -> Vec<[u8; 16]> {
    (0..clusters)
        .map(|j| keystream_bytes(primary, &iv(IV_SUBKEY, client, generation, j as u64), 16).try_into().unwrap())
        .collect()
}

/// The pad hiding `k_c` from the client.
pub fn key_pad(primary: &[u8; 16], client: u32, generation: u64) -> [u8; 16] {
    keystream_bytes(primary, &iv(IV_KEY, client, generation, 0), 16).try_into().unwrap()
}

/// `(start, len)` of every chunk of a `lanes`-long region.
pub fn chunks(lanes: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..lanes.div_ceil(CHUNK_LANES)).map(move |c| (c * CHUNK_LANES, CHUNK_LANES.min(lanes - c * CHUNK_LANES)))
}

fn region_stream(key: &[u8; 16], domain: &str, client: u32, generation: u64, lanes: usize) -> Vec<u16> {
    let mut out = Vec::with_capacity(lanes);
    for (c, (_, len)) in chunks(lanes).enumerate() {
        out.extend(keystream_lanes(key, &iv(domain, client, generation, c as u64), len));
    }
    out
}

/// Centroid lanes followed by stash lanes: the region unmasked on every query.
pub fn sc_lanes(layout: &SetsLayout, body: &[u16]) -> Vec<u16> {
    let mut out = body[..layout.centroid_lanes()].to_vec();
    out.extend_from_slice(&body[layout.stash_offset()..layout.body_lanes()]);
    out
}

/// The keystream covering a body in body order. The centroid and stash
/// region runs under `k_c`, each cluster under its own subkey.
pub fn body_stream(layout: &SetsLayout, client_key: &[u8; 16], subkeys: &[[u8; 16]], client: u32, generation: u64) -> Vec<u16> {
    let sc_len = layout.centroid_lanes() + layout.stash_lanes();
    let sc = region_stream(client_key, IV_SC, client, generation, sc_len);
    let mut out = Vec::with_capacity(layout.body_lanes());
    out.extend_from_slice(&sc[..layout.centroid_lanes()]);
    for key in subkeys {
        out.extend(region_stream(key, IV_CLUSTER, client, generation, layout.cluster_lanes()));
    }
    out.extend_from_slice(&sc[layout.centroid_lanes()..]);
    out
}

/// A labelled tree of seeds below one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree([u8; 32]);

impl SeedTree {
    pub fn new(master: [u8; 32]) -> Self {
        Self(master)
    }

    /// The tree used for a numeric `PRS_SEED`.
    pub fn from_u64(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"prs-seed");
        h.update(seed.to_le_bytes());
        Self(h.finalize().into())
    }

    pub fn seed(&self, label: &str, index: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((label.len() as u8).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        h.finalize().into()
    }

    pub fn child(&self, label: &str, index: u64) -> SeedTree {
        SeedTree(self.seed(label, index))
    }

    pub fn rng(&self, label: &str, index: u64) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.seed(label, index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunking_covers_region() {
        let c: Vec<_> = chunks(2500).collect();
        assert_eq!(c, vec![(0, 1024), (1024, 1024), (2048, 452)]);
        assert_eq!(chunks(0).count(), 0);
        assert_eq!(chunks(1024).count(), 1);
    }

    #[test]
    fn ivs_separate_domains_and_generations() {
        let a = iv(IV_SC, 1, 0, 0);
        assert_ne!(a, iv(IV_CLUSTER, 1, 0, 0));
        assert_ne!(a, iv(IV_SC, 1, 1, 0));
        assert_ne!(a, iv(IV_SC, 2, 0, 0));
        assert_eq!(a, iv(IV_SC, 1, 0, 0));
    }
}
