//! Coefficient packing of vectors into plaintext polynomials.
//!
//! With the query `Q(x) = sum_j q_j x^j` and an item placed in reversed
//! order at offset `o`, coefficient `o + k - 1` of the negacyclic product is
//! the inner product. Two packings are supported:
//!
//! * `Shared`: one query polynomial against `B = floor(d / k)` items per
//!   plaintext at stride `k`. Wraparound from the top block only reaches
//!   coefficients below `k - 1`, which are not read.
//! * `Folded`: both operands vary per candidate. The encrypted side puts
//!   candidate `b` at stride `k`, the plaintext side at stride `B k`, so every
//!   cross product `(b', b)` lands at `(b' + b B) k + k - 1` and only the
//!   diagonal pairs are read. `B` is the largest value with `B^2 k + k - 2 < d`.

use crate::bfv::PlainPoly;
use crate::error::{HeError, Result};
use crate::params::HeContext;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Packing {
    Shared,
    Folded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PackingLayout {
    pub degree: usize,
    pub k: usize,
    /// Candidate slots per plaintext.
    pub blocks: usize,
    pub packing: Packing,
}

impl PackingLayout {
    pub fn shared(degree: usize, k: usize) -> Result<Self> {
        if k == 0 || k > degree {
            return Err(HeError::DimensionTooLarge { k, degree });
        }
        Ok(Self { degree, k, blocks: degree / k, packing: Packing::Shared })
    }

    pub fn folded(degree: usize, k: usize) -> Result<Self> {
        if k == 0 || 2 * k - 2 >= degree {
            return Err(HeError::DimensionTooLarge { k, degree });
        }
        let mut b = 1;
        while (b + 1) * (b + 1) * k + k - 2 < degree {
            b += 1;
        }
        Ok(Self { degree, k, blocks: b, packing: Packing::Folded })
    }

    /// Coefficient holding the result for slot `b` of a plaintext.
    pub fn extraction_index(&self, b: usize) -> usize {
        match self.packing {
            Packing::Shared => b * self.k + self.k - 1,
            Packing::Folded => b * (self.blocks + 1) * self.k + self.k - 1,
        }
    }

    /// Plaintexts needed for `candidates` plus the trailing sanity slot.
    pub fn plaintexts_for(&self, candidates: usize) -> usize {
        (candidates + 1).div_ceil(self.blocks)
    }

    /// `(plaintext, slot)` of candidate `i`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        (i / self.blocks, i % self.blocks)
    }

    fn check(&self, ctx: &HeContext) -> Result<()> {
        if self.degree != ctx.degree() {
            return Err(HeError::LayoutMismatch(format!("layout degree {} vs ring degree {}", self.degree, ctx.degree())));
        }
        Ok(())
    }

    fn check_vector(&self, v: &[u16], t: u64) -> Result<()> {
        if v.len() != self.k {
            return Err(HeError::LayoutMismatch(format!("vector of length {} for k = {}", v.len(), self.k)));
        }
        if let Some(&c) = v.iter().find(|&&c| c as u64 >= t) {
            return Err(HeError::CoefficientOutOfRange { value: c as u64, modulus: t });
        }
        Ok(())
    }
}

/// Fixed vectors occupying the slot after the last candidate of every batch.
pub fn sanity_vectors(k: usize) -> (Vec<u16>, Vec<u16>) {
    let enc_side = (0..k).map(|j| (j % 5 + 1) as u16).collect();
    let plain_side = (0..k).map(|j| ((3 * j + 2) % 7) as u16).collect();
    (enc_side, plain_side)
}

/// Squared distance mod 2^16.
pub fn squared_distance(a: &[u16], b: &[u16]) -> u16 {
    a.iter().zip(b).fold(0u16, |acc, (&x, &y)| {
        let d = x.wrapping_sub(y);
        acc.wrapping_add(d.wrapping_mul(d))
    })
}

pub fn sum_of_squares(a: &[u16]) -> u16 {
    a.iter().fold(0u16, |acc, &x| acc.wrapping_add(x.wrapping_mul(x)))
}

/// `Q(x) = sum_j q_j x^j` for the shared packing.
pub fn encode_query(ctx: &HeContext, q: &[u16], layout: &PackingLayout) -> Result<PlainPoly> {
    layout.check(ctx)?;
    layout.check_vector(q, ctx.plain_modulus())?;
    let mut coeffs = vec![0u64; ctx.degree()];
    for (c, &v) in coeffs.iter_mut().zip(q) {
        *c = v as u64;
    }
    PlainPoly::new(ctx, coeffs)
}

fn place(coeffs: &mut [u64], offset: usize, v: &[u16], reversed: bool, scale: impl Fn(u16) -> u64) {
    let k = v.len();
    for (j, &x) in v.iter().enumerate() {
        let at = if reversed { offset + k - 1 - j } else { offset + j };
        coeffs[at] = scale(x);
    }
}

/// Packs the plaintext-side operands, reversed, with each coordinate mapped
/// through `scale`. Slots past the end stay zero.
fn encode_plain_side(
    ctx: &HeContext,
    vectors: &[&[u16]],
    layout: &PackingLayout,
    scale: impl Fn(u16) -> u64 + Copy,
) -> Result<Vec<PlainPoly>> {
    layout.check(ctx)?;
    let t = ctx.plain_modulus();
    let stride = match layout.packing {
        Packing::Shared => layout.k,
        Packing::Folded => layout.blocks * layout.k,
    };
    let mut out = Vec::new();
    for chunk in vectors.chunks(layout.blocks) {
        let mut coeffs = vec![0u64; ctx.degree()];
        for (b, v) in chunk.iter().enumerate() {
            layout.check_vector(v, t)?;
            place(&mut coeffs, b * stride, v, true, scale);
        }
        out.push(PlainPoly::new(ctx, coeffs)?);
    }
    Ok(out)
}

/// Items packed in reversed coordinate order, one plaintext per `B` items.
pub fn encode_items(ctx: &HeContext, vectors: &[&[u16]], layout: &PackingLayout) -> Result<Vec<PlainPoly>> {
    encode_plain_side(ctx, vectors, layout, |x| x as u64)
}

/// Encrypted-side operands of the folded packing, natural order at stride `k`.
pub fn encode_blocks(ctx: &HeContext, vectors: &[&[u16]], layout: &PackingLayout) -> Result<Vec<PlainPoly>> {
    layout.check(ctx)?;
    if layout.packing != Packing::Folded {
        return Err(HeError::LayoutMismatch("per-candidate encrypted blocks need the folded packing".into()));
    }
    let t = ctx.plain_modulus();
    let mut out = Vec::new();
    for chunk in vectors.chunks(layout.blocks) {
        let mut coeffs = vec![0u64; ctx.degree()];
        for (b, v) in chunk.iter().enumerate() {
            layout.check_vector(v, t)?;
            place(&mut coeffs, b * layout.k, v, false, |x| x as u64);
        }
        out.push(PlainPoly::new(ctx, coeffs)?);
    }
    Ok(out)
}

/// Plaintext-side operands for the kernel: `-2 v` packed as in
/// [`encode_items`], plus `sum v^2` at each extraction coefficient.
pub fn prepare_plain_side(ctx: &HeContext, vectors: &[&[u16]], layout: &PackingLayout) -> Result<(Vec<PlainPoly>, Vec<PlainPoly>)> {
    let t = ctx.plain_modulus();
    let neg2 = move |x: u16| (t - (2 * x as u64) % t) % t;
    let products = encode_plain_side(ctx, vectors, layout, neg2)?;
    let mut sq = Vec::with_capacity(products.len());
    for chunk in vectors.chunks(layout.blocks) {
        let mut coeffs = vec![0u64; ctx.degree()];
        for (b, v) in chunk.iter().enumerate() {
            let s: u64 = v.iter().map(|&x| x as u64 * x as u64).sum();
            coeffs[layout.extraction_index(b)] = s % t;
        }
        sq.push(PlainPoly::new(ctx, coeffs)?);
    }
    Ok((products, sq))
}

/// A constant at every extraction coefficient, for the encrypted `sum q^2`.
pub fn encode_replicated(ctx: &HeContext, value: u64, layout: &PackingLayout) -> Result<PlainPoly> {
    layout.check(ctx)?;
    let mut coeffs = vec![0u64; ctx.degree()];
    for b in 0..layout.blocks {
        coeffs[layout.extraction_index(b)] = value % ctx.plain_modulus();
    }
    PlainPoly::new(ctx, coeffs)
}
