//! Oblivious transfer: a Chou-Orlandi style base OT over Ristretto and an
//! IKNP extension on top of 128 base OTs with the roles reversed.
//!
//! In the garbled-circuit session the client is the extension receiver, and
//! therefore the base-OT sender.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::block::{blocks_to_bytes, Block, FixedKeyHash};
use crate::error::{MpcError, Result};

pub const BASE_OTS: usize = 128;

type Seed = [u8; 32];

fn point_key(i: usize, p: &RistrettoPoint) -> Seed {
    let mut h = Sha256::new();
    h.update(b"prs base ot");
    h.update((i as u64).to_le_bytes());
    h.update(p.compress().as_bytes());
    h.finalize().into()
}

fn decode_point(bytes: &[u8]) -> Result<RistrettoPoint> {
    CompressedRistretto::from_slice(bytes)
        .ok()
        .and_then(|c| c.decompress())
        .ok_or_else(|| MpcError::Malformed("invalid group element".into()))
}

/// Base-OT sender: ends up with a random key pair per OT.
pub struct BaseSender {
    a: Scalar,
    big_a: RistrettoPoint,
}

impl BaseSender {
    /// Returns the sender state and its first message.
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> (Self, Vec<u8>) {
        let a = Scalar::random(rng);
        let big_a = &a * RISTRETTO_BASEPOINT_TABLE;
        (Self { a, big_a }, big_a.compress().as_bytes().to_vec())
    }

    pub fn finish(&self, reply: &[u8]) -> Result<Vec<(Seed, Seed)>> {
        if reply.len() % 32 != 0 {
            return Err(MpcError::Malformed("base OT reply length".into()));
        }
        reply
            .chunks_exact(32)
            .enumerate()
            .map(|(i, c)| {
                let b = decode_point(c)?;
                Ok((point_key(i, &(self.a * b)), point_key(i, &(self.a * (b - self.big_a)))))
            })
            .collect()
    }
}

/// Base-OT receiver: answers the sender's message and learns one key per
/// choice bit.
pub fn base_receive<R: RngCore + CryptoRng>(setup: &[u8], choices: &[bool], rng: &mut R) -> Result<(Vec<u8>, Vec<Seed>)> {
    if setup.len() != 32 {
        return Err(MpcError::Malformed("base OT setup length".into()));
    }
    let big_a = decode_point(setup)?;
    let mut reply = Vec::with_capacity(32 * choices.len());
    let mut keys = Vec::with_capacity(choices.len());
    for (i, &c) in choices.iter().enumerate() {
        let b = Scalar::random(rng);
        let bg = &b * RISTRETTO_BASEPOINT_TABLE;
        let msg = if c { big_a + bg } else { bg };
        reply.extend_from_slice(msg.compress().as_bytes());
        keys.push(point_key(i, &(b * big_a)));
    }
    Ok((reply, keys))
}

/// In-place transpose of a 128x128 bit matrix: afterwards bit `c` of row
/// `r` is what bit `r` of row `c` was.
pub fn transpose128(m: &mut [u128; 128]) {
    let mut j = 64;
    let mut mask: u128 = u64::MAX as u128;
    while j != 0 {
        for k in 0..128 {
            if k & j == 0 {
                let t = ((m[k] >> j) ^ m[k + j]) & mask;
                m[k] ^= t << j;
                m[k + j] ^= t;
            }
        }
        j >>= 1;
        mask ^= mask << j;
    }
}

fn expand(seed: &Seed, batch: u64, blocks: usize) -> Vec<u128> {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    rng.set_stream(batch);
    (0..blocks).map(|_| rng.gen()).collect()
}

fn ot_tweak(batch: u64, i: usize) -> u128 {
    (1u128 << 127) | ((batch as u128) << 64) | i as u128
}

/// Rows of the `m x 128` matrix whose columns are given.
fn rows_of(columns: &[Vec<u128>], m: usize) -> Vec<u128> {
    let blocks = m.div_ceil(128);
    let mut rows = Vec::with_capacity(blocks * 128);
    let mut tile = [0u128; 128];
    for b in 0..blocks {
        for (j, col) in columns.iter().enumerate() {
            tile[j] = col[b];
        }
        transpose128(&mut tile);
        rows.extend_from_slice(&tile);
    }
    rows.truncate(m);
    rows
}

fn pack_choices(choices: &[bool]) -> Vec<u128> {
    let mut out = vec![0u128; choices.len().div_ceil(128)];
    for (i, &c) in choices.iter().enumerate() {
        out[i / 128] |= (c as u128) << (i % 128);
    }
    out
}

/// Extension sender (the garbler). Holds one base key per column.
pub struct ExtSender {
    s: u128,
    keys: Vec<Seed>,
    batch: u64,
    hash: FixedKeyHash,
}

impl ExtSender {
    /// Runs the base-OT receiver side with random choices `s`.
    pub fn from_base<R: RngCore + CryptoRng>(setup: &[u8], rng: &mut R) -> Result<(Self, Vec<u8>)> {
        let s: u128 = rng.gen();
        let choices: Vec<bool> = (0..BASE_OTS).map(|j| (s >> j) & 1 == 1).collect();
        let (reply, keys) = base_receive(setup, &choices, rng)?;
        Ok((Self { s, keys, batch: 0, hash: FixedKeyHash::default() }, reply))
    }

    /// Consumes the receiver's correction matrix and masks each pair.
    pub fn send(&mut self, matrix: &[u8], pairs: &[(Block, Block)]) -> Result<Vec<u8>> {
        let m = pairs.len();
        let blocks = m.div_ceil(128);
        if matrix.len() != BASE_OTS * blocks * 16 {
            return Err(MpcError::Malformed(format!("OT matrix of {} bytes for {m} transfers", matrix.len())));
        }
        let batch = self.batch;
        self.batch += 1;
        let columns: Vec<Vec<u128>> = (0..BASE_OTS)
            .map(|j| {
                let mut q = expand(&self.keys[j], batch, blocks);
                if (self.s >> j) & 1 == 1 {
                    let u = &matrix[j * blocks * 16..(j + 1) * blocks * 16];
                    for (b, chunk) in u.chunks_exact(16).enumerate() {
                        q[b] ^= u128::from_le_bytes(chunk.try_into().unwrap());
                    }
                }
                q
            })
            .collect();
        let rows = rows_of(&columns, m);
        let mut out = Vec::with_capacity(2 * m);
        let mut h = [Block::ZERO; 2];
        for (i, (&q, &(x0, x1))) in rows.iter().zip(pairs).enumerate() {
            let t = ot_tweak(batch, i);
            self.hash.hash_many(&[Block(q), Block(q ^ self.s)], &[t, t], &mut h);
            out.push(x0 ^ h[0]);
            out.push(x1 ^ h[1]);
        }
        Ok(blocks_to_bytes(&out))
    }
}

/// Extension receiver (the evaluator). Holds both base keys per column.
pub struct ExtReceiver {
    keys: Vec<(Seed, Seed)>,
    batch: u64,
    hash: FixedKeyHash,
}

/// Receiver state between sending the matrix and reading the payload.
pub struct PendingReceive {
    rows: Vec<u128>,
    choices: Vec<bool>,
    batch: u64,
}

impl ExtReceiver {
    pub fn from_base(sender: &BaseSender, reply: &[u8]) -> Result<Self> {
        let keys = sender.finish(reply)?;
        if keys.len() != BASE_OTS {
            return Err(MpcError::Malformed(format!("{} base OTs instead of {BASE_OTS}", keys.len())));
        }
        Ok(Self { keys, batch: 0, hash: FixedKeyHash::default() })
    }

    /// Builds the correction matrix for `choices`.
    pub fn request(&mut self, choices: &[bool]) -> (Vec<u8>, PendingReceive) {
        let m = choices.len();
        let blocks = m.div_ceil(128);
        let batch = self.batch;
        self.batch += 1;
        let r = pack_choices(choices);
        let mut matrix = Vec::with_capacity(BASE_OTS * blocks * 16);
        let mut columns = Vec::with_capacity(BASE_OTS);
        for (k0, k1) in &self.keys {
            let t = expand(k0, batch, blocks);
            let g1 = expand(k1, batch, blocks);
            for b in 0..blocks {
                matrix.extend_from_slice(&(t[b] ^ g1[b] ^ r[b]).to_le_bytes());
            }
            columns.push(t);
        }
        let rows = rows_of(&columns, m);
        (matrix, PendingReceive { rows, choices: choices.to_vec(), batch })
    }

    pub fn receive(&self, pending: PendingReceive, payload: &[u8]) -> Result<Vec<Block>> {
        let m = pending.choices.len();
        if payload.len() != 32 * m {
            return Err(MpcError::Malformed(format!("OT payload of {} bytes for {m} transfers", payload.len())));
        }
        Ok(pending
            .rows
            .iter()
            .zip(&pending.choices)
            .enumerate()
            .map(|(i, (&t, &c))| {
                let off = 32 * i + 16 * c as usize;
                Block::from_bytes(&payload[off..off + 16]) ^ self.hash.hash(Block(t), ot_tweak(pending.batch, i))
            })
            .collect())
    }
}
