//! 128-bit labels and the fixed-key hash used for garbling and OT.

use std::ops::{BitAnd, BitXor, BitXorAssign};

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::Rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Block(pub u128);

impl Block {
    pub const ZERO: Block = Block(0);

    pub fn random(rng: &mut impl Rng) -> Self {
        Block(rng.gen())
    }

    #[inline]
    pub fn lsb(self) -> bool {
        self.0 & 1 == 1
    }

    /// `self` if `bit`, else zero.
    #[inline]
    pub fn select(self, bit: bool) -> Self {
        Block(self.0 & (bit as u128).wrapping_neg())
    }

    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }

    pub fn from_bytes(b: &[u8]) -> Self {
        Block(u128::from_le_bytes(b.try_into().expect("16 bytes")))
    }

    /// Linear orthomorphism `(hi, lo) -> (hi ^ lo, hi)`.
    #[inline]
    fn sigma(self) -> Self {
        let hi = (self.0 >> 64) as u64;
        let lo = self.0 as u64;
        Block((((hi ^ lo) as u128) << 64) | hi as u128)
    }
}

impl BitXor for Block {
    type Output = Block;
    #[inline]
    fn bitxor(self, rhs: Block) -> Block {
        Block(self.0 ^ rhs.0)
    }
}

impl BitXorAssign for Block {
    #[inline]
    fn bitxor_assign(&mut self, rhs: Block) {
        self.0 ^= rhs.0;
    }
}

impl BitAnd for Block {
    type Output = Block;
    #[inline]
    fn bitand(self, rhs: Block) -> Block {
        Block(self.0 & rhs.0)
    }
}

pub fn blocks_to_bytes(blocks: &[Block]) -> Vec<u8> {
    blocks.iter().flat_map(|b| b.to_bytes()).collect()
}

pub fn bytes_to_blocks(bytes: &[u8]) -> Option<Vec<Block>> {
    (bytes.len() % 16 == 0).then(|| bytes.chunks_exact(16).map(Block::from_bytes).collect())
}

/// Tweakable hash `H(x, i) = pi(sigma(x) ^ i) ^ sigma(x) ^ i` over a
/// fixed-key AES permutation `pi`.
#[derive(Clone)]
pub struct FixedKeyHash {
    aes: Aes128,
}

const FIXED_KEY: [u8; 16] = *b"prs-gc fixed key";

impl Default for FixedKeyHash {
    fn default() -> Self {
        Self { aes: Aes128::new(&FIXED_KEY.into()) }
    }
}

impl FixedKeyHash {
    #[inline]
    pub fn hash(&self, x: Block, tweak: u128) -> Block {
        let mut out = [Block::ZERO];
        self.hash_many(&[x], &[tweak], &mut out);
        out[0]
    }

    /// Hashes `xs[i]` under `tweaks[i]`, batching the AES calls.
    #[inline]
    pub fn hash_many(&self, xs: &[Block], tweaks: &[u128], out: &mut [Block]) {
        debug_assert!(xs.len() == tweaks.len() && xs.len() == out.len() && xs.len() <= 8);
        let mut pre = [Block::ZERO; 8];
        let mut buf = [aes::Block::default(); 8];
        for i in 0..xs.len() {
            pre[i] = Block(xs[i].sigma().0 ^ tweaks[i]);
            buf[i] = pre[i].to_bytes().into();
        }
        self.aes.encrypt_blocks(&mut buf[..xs.len()]);
        for i in 0..xs.len() {
            out[i] = Block::from_bytes(&buf[i]) ^ pre[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batched_hash_matches_single() {
        let h = FixedKeyHash::default();
        let xs = [Block(1), Block(2), Block(u128::MAX)];
        let ts = [5u128, 5, 7];
        let mut out = [Block::ZERO; 3];
        h.hash_many(&xs, &ts, &mut out);
        for i in 0..3 {
            assert_eq!(out[i], h.hash(xs[i], ts[i]));
        }
        assert_ne!(h.hash(Block(1), 0), h.hash(Block(1), 1));
    }

    #[test]
    fn select_and_bytes() {
        let b = Block(0xdead_beef);
        assert_eq!(b.select(true), b);
        assert_eq!(b.select(false), Block::ZERO);
        assert_eq!(Block::from_bytes(&b.to_bytes()), b);
    }
}
