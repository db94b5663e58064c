//! Kreyvium keystream: a word-level software engine producing 64 bits per
//! step and a circuit version generic over [`Gates`].
//!
//! Key and IV bits are numbered most significant bit of byte 0 first. The
//! keystream is emitted in the same order, so byte `i` of the stream holds
//! bits `8i..8i+8` with the earliest bit in its top position.

use std::collections::VecDeque;

use crate::builder::Gates;

pub const INIT_ROUNDS: usize = 1152;

const MASK_A: u128 = (1 << 93) - 1;
const MASK_B: u128 = (1 << 84) - 1;
const MASK_C: u128 = (1 << 111) - 1;

/// Software engine. Each register is kept with its first cell at bit 0, so
/// 64 consecutive rounds can be computed at once: no tap is closer than 66
/// cells to the feedback end.
#[derive(Clone, Debug)]
pub struct Kreyvium {
    a: u128,
    b: u128,
    c: u128,
    key: u128,
    iv: u128,
    pending: [u8; 8],
    pending_len: usize,
}

#[inline]
fn tap(reg: u128, pos: u32) -> u64 {
    (reg >> (pos - 64)) as u64
}

impl Kreyvium {
    pub fn new(key: &[u8; 16], iv: &[u8; 16]) -> Self {
        let k = u128::from_be_bytes(*key);
        let v = u128::from_be_bytes(*iv);
        let kr = k.reverse_bits();
        let vr = v.reverse_bits();
        let mut s = Self {
            a: kr & MASK_A,
            b: vr & MASK_B,
            c: (vr >> 84) | (((1u128 << 66) - 1) << 44),
            key: k,
            iv: v,
            pending: [0; 8],
            pending_len: 0,
        };
        for _ in 0..INIT_ROUNDS / 64 {
            s.step64();
        }
        s
    }

    /// Advances 64 rounds; bit `63 - j` of the result is the output of round `j`.
    #[inline]
    fn step64(&mut self) -> u64 {
        let (a, b, c) = (self.a, self.b, self.c);
        let kw = (self.key as u64).reverse_bits();
        let vw = (self.iv as u64).reverse_bits();
        self.key = self.key.rotate_right(64);
        self.iv = self.iv.rotate_right(64);

        let mut t1 = tap(a, 66) ^ tap(a, 93);
        let mut t2 = tap(b, 69) ^ tap(b, 84);
        let mut t3 = tap(c, 66) ^ tap(c, 111) ^ kw;
        let z = t1 ^ t2 ^ t3;
        t1 ^= (tap(a, 91) & tap(a, 92)) ^ tap(b, 78) ^ vw;
        t2 ^= (tap(b, 82) & tap(b, 83)) ^ tap(c, 87);
        t3 ^= (tap(c, 109) & tap(c, 110)) ^ tap(a, 69);
        self.a = ((a << 64) | t3 as u128) & MASK_A;
        self.b = ((b << 64) | t1 as u128) & MASK_B;
        self.c = ((c << 64) | t2 as u128) & MASK_C;
        z
    }

    /// Writes the next `out.len()` keystream bytes.
    pub fn fill(&mut self, out: &mut [u8]) {
        let mut i = 0;
        while i < out.len() && self.pending_len > 0 {
            out[i] = self.pending[8 - self.pending_len];
            self.pending_len -= 1;
            i += 1;
        }
        let mut chunks = out[i..].chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&self.step64().to_be_bytes());
        }
        let rest = chunks.into_remainder();
        if !rest.is_empty() {
            let w = self.step64().to_be_bytes();
            let n = rest.len();
            rest.copy_from_slice(&w[..n]);
            self.pending = w;
            self.pending_len = 8 - n;
        }
    }
}

pub fn keystream_bytes(key: &[u8; 16], iv: &[u8; 16], len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    Kreyvium::new(key, iv).fill(&mut out);
    out
}

pub fn keystream_bits(key: &[u8; 16], iv: &[u8; 16], n: usize) -> Vec<bool> {
    let bytes = keystream_bytes(key, iv, n.div_ceil(8));
    (0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1).collect()
}

/// Keystream as 16-bit lanes; lane `i` is stream bits `16i..16i+16` read
/// big-endian.
pub fn keystream_lanes(key: &[u8; 16], iv: &[u8; 16], lanes: usize) -> Vec<u16> {
    keystream_bytes(key, iv, 2 * lanes).chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
}

/// Keystream inside a circuit. `key` and `iv` hold 128 bits each in stream
/// order. Costs three ANDs per round.
pub fn kreyvium_bits<G: Gates>(g: &mut G, key: &[G::Bit], iv: &[G::Bit], n: usize) -> Vec<G::Bit> {
    assert_eq!(key.len(), 128);
    assert_eq!(iv.len(), 128);
    let one = g.constant(true);
    let zero = g.constant(false);
    let mut a: VecDeque<G::Bit> = key[..93].iter().copied().collect();
    let mut b: VecDeque<G::Bit> = iv[..84].iter().copied().collect();
    let mut c: VecDeque<G::Bit> = iv[84..].iter().copied().collect();
    c.extend(std::iter::repeat(one).take(66));
    c.push_back(zero);
    // Rotating registers, front = next bit consumed.
    let mut kr: VecDeque<G::Bit> = key.iter().rev().copied().collect();
    let mut vr: VecDeque<G::Bit> = iv.iter().rev().copied().collect();

    let mut out = Vec::with_capacity(n);
    for round in 0..INIT_ROUNDS + n {
        let k0 = kr[0];
        let v0 = vr[0];
        kr.rotate_left(1);
        vr.rotate_left(1);
        let mut t1 = g.xor(a[65], a[92]);
        let mut t2 = g.xor(b[68], b[83]);
        let x = g.xor(c[65], c[110]);
        let mut t3 = g.xor(x, k0);
        if round >= INIT_ROUNDS {
            let z = g.xor(t1, t2);
            out.push(g.xor(z, t3));
        }
        let p1 = g.and(a[90], a[91]);
        let p2 = g.and(b[81], b[82]);
        let p3 = g.and(c[108], c[109]);
        let f1 = g.xor(p1, b[77]);
        let f1 = g.xor(f1, v0);
        t1 = g.xor(t1, f1);
        let f2 = g.xor(p2, c[86]);
        t2 = g.xor(t2, f2);
        let f3 = g.xor(p3, a[68]);
        t3 = g.xor(t3, f3);
        a.pop_back();
        a.push_front(t3);
        b.pop_back();
        b.push_front(t1);
        c.pop_back();
        c.push_front(t2);
    }
    out
}
