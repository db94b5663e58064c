//! Masked squared-distance evaluation and share extraction.
//!
//! The evaluator computes `sum a^2 - 2 <a, v> + sum v^2` per candidate slot
//! (the `sum a^2` term optionally under encryption), adds a uniform mask over
//! every coefficient and floods the noise. The decryptor's coefficient minus
//! the evaluator's mask is the distance mod `t`. The slot after the last
//! candidate carries fixed public vectors and no mask, so a decryption
//! failure shows up as a wrong sanity value instead of silent garbage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::bfv::{add, add_plain, decrypt, encrypt_sk, flood, mul_plain, Ciphertext, PlainPoly, SecretKey};
use crate::error::{HeError, Result};
use crate::layout::{
    encode_blocks, encode_query, encode_replicated, prepare_plain_side, sanity_vectors, squared_distance, sum_of_squares,
    Packing, PackingLayout,
};
use crate::params::HeContext;

/// Additive shares with `client - cloud = distance (mod 2^16)`, one per candidate.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DistanceShares {
    pub client: Vec<u16>,
    pub cloud: Vec<u16>,
}

impl DistanceShares {
    pub fn reconstruct(&self) -> Vec<u16> {
        self.client.iter().zip(&self.cloud).map(|(&c, &s)| c.wrapping_sub(s)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct MaskedBatch {
    pub ciphertexts: Vec<Ciphertext>,
    /// Mask values at the extraction coefficients of real candidates.
    pub cloud_share: Vec<u16>,
}

fn ensure_budget(ctx: &HeContext, ct: &Ciphertext) -> Result<()> {
    let bits = ct.budget_estimate(ctx);
    if bits <= 0.0 {
        return Err(HeError::NoiseBudgetExhausted { bits });
    }
    Ok(())
}

/// Runs the kernel over prepared plaintext operands.
///
/// `queries` is either a single ciphertext used against every plaintext
/// (shared packing) or one ciphertext per plaintext (folded packing).
/// `products` hold `-2 v` and `sq_sums` hold `sum v^2`, both including the
/// sanity slot at index `candidates`.
#[allow(clippy::too_many_arguments)]
pub fn distance_kernel(
    ctx: &HeContext,
    layout: &PackingLayout,
    queries: &[Ciphertext],
    query_sq: Option<&Ciphertext>,
    products: &[PlainPoly],
    sq_sums: &[PlainPoly],
    candidates: usize,
    mask_seed: [u8; 32],
) -> Result<MaskedBatch> {
    let n_pt = layout.plaintexts_for(candidates);
    if products.len() != n_pt || sq_sums.len() != n_pt {
        return Err(HeError::LayoutMismatch(format!("{} plaintexts for {candidates} candidates, expected {n_pt}", products.len())));
    }
    if queries.len() != 1 && queries.len() != n_pt {
        return Err(HeError::LayoutMismatch(format!("{} query ciphertexts for {n_pt} plaintexts", queries.len())));
    }
    let t = ctx.plain_modulus();
    let mut mask_rng = ChaCha20Rng::from_seed(mask_seed);
    let mut flood_rng = ChaCha20Rng::from_seed(mask_seed);
    flood_rng.set_stream(1);
    let (sanity_pt, sanity_slot) = layout.position(candidates);
    let sanity_coeff = layout.extraction_index(sanity_slot);

    let mut out = Vec::with_capacity(n_pt);
    let mut cloud_share = Vec::with_capacity(candidates);
    for (i, (prod, sq)) in products.iter().zip(sq_sums).enumerate() {
        let q = if queries.len() == 1 { &queries[0] } else { &queries[i] };
        let mut ct = mul_plain(ctx, q, prod)?;
        ct = add_plain(ctx, &ct, sq)?;
        if let Some(qs) = query_sq {
            ct = add(ctx, &ct, qs)?;
        }
        let mut mask: Vec<u64> = (0..ctx.degree()).map(|_| mask_rng.gen_range(0..t)).collect();
        if i == sanity_pt {
            mask[sanity_coeff] = 0;
        }
        for slot in 0..layout.blocks {
            if i * layout.blocks + slot < candidates {
                cloud_share.push(mask[layout.extraction_index(slot)] as u16);
            }
        }
        ct = add_plain(ctx, &ct, &PlainPoly::new(ctx, mask)?)?;
        flood(ctx, &mut ct, &mut flood_rng);
        ensure_budget(ctx, &ct)?;
        out.push(ct);
    }
    Ok(MaskedBatch { ciphertexts: out, cloud_share })
}

/// Decrypts the extraction coefficients of real candidates after checking
/// the sanity slot against `expected_sanity`.
pub fn decrypt_shares(
    ctx: &HeContext,
    sk: &SecretKey,
    cts: &[Ciphertext],
    layout: &PackingLayout,
    candidates: usize,
    expected_sanity: u16,
) -> Result<Vec<u16>> {
    if cts.len() != layout.plaintexts_for(candidates) {
        return Err(HeError::LayoutMismatch(format!("{} ciphertexts for {candidates} candidates", cts.len())));
    }
    let mut out = Vec::with_capacity(candidates);
    for (i, ct) in cts.iter().enumerate() {
        let pt = decrypt(ctx, sk, ct);
        for slot in 0..layout.blocks {
            let idx = i * layout.blocks + slot;
            let v = pt.coeffs()[layout.extraction_index(slot)] as u16;
            if idx < candidates {
                out.push(v);
            } else if idx == candidates && v != expected_sanity {
                return Err(HeError::SanityCheckFailed { expected: expected_sanity, got: v });
            }
        }
    }
    Ok(out)
}

/// Client side of the shared packing: `Enc(Q)` and `Enc(sum q^2)` replicated.
pub fn encrypt_query(
    ctx: &HeContext,
    sk: &SecretKey,
    q: &[u16],
    layout: &PackingLayout,
    rng: &mut impl Rng,
) -> Result<(Ciphertext, Ciphertext)> {
    let qp = encode_query(ctx, q, layout)?;
    let sq = encode_replicated(ctx, sum_of_squares(q) as u64, layout)?;
    Ok((encrypt_sk(ctx, sk, &qp, rng), encrypt_sk(ctx, sk, &sq, rng)))
}

fn with_sanity<'a>(vectors: &[&'a [u16]], sanity: &'a [u16]) -> Vec<&'a [u16]> {
    let mut v = vectors.to_vec();
    v.push(sanity);
    v
}

/// Cloud side of the shared packing.
pub fn evaluate_shared(
    ctx: &HeContext,
    layout: &PackingLayout,
    enc_q: &Ciphertext,
    enc_sq: &Ciphertext,
    items: &[&[u16]],
    mask_seed: [u8; 32],
) -> Result<MaskedBatch> {
    let (_, sanity) = sanity_vectors(layout.k);
    let (products, sq) = prepare_plain_side(ctx, &with_sanity(items, &sanity), layout)?;
    distance_kernel(ctx, layout, std::slice::from_ref(enc_q), Some(enc_sq), &products, &sq, items.len(), mask_seed)
}

/// Client decryption for the shared packing.
pub fn decrypt_shared(ctx: &HeContext, sk: &SecretKey, cts: &[Ciphertext], layout: &PackingLayout, q: &[u16], candidates: usize) -> Result<Vec<u16>> {
    let (_, sanity) = sanity_vectors(layout.k);
    decrypt_shares(ctx, sk, cts, layout, candidates, squared_distance(q, &sanity))
}

/// Client side of the folded packing: one vector per candidate.
pub fn encrypt_blocks(
    ctx: &HeContext,
    sk: &SecretKey,
    vectors: &[&[u16]],
    layout: &PackingLayout,
    rng: &mut impl Rng,
) -> Result<Vec<Ciphertext>> {
    let (sanity, _) = sanity_vectors(layout.k);
    let pts = encode_blocks(ctx, &with_sanity(vectors, &sanity), layout)?;
    Ok(pts.iter().map(|p| encrypt_sk(ctx, sk, p, rng)).collect())
}

/// Cloud side of the folded packing. The client adds `sum a^2` itself.
pub fn evaluate_folded(
    ctx: &HeContext,
    layout: &PackingLayout,
    enc_blocks: &[Ciphertext],
    vectors: &[&[u16]],
    mask_seed: [u8; 32],
) -> Result<MaskedBatch> {
    if layout.packing != Packing::Folded {
        return Err(HeError::LayoutMismatch("evaluate_folded needs the folded packing".into()));
    }
    let (_, sanity) = sanity_vectors(layout.k);
    let (products, sq) = prepare_plain_side(ctx, &with_sanity(vectors, &sanity), layout)?;
    distance_kernel(ctx, layout, enc_blocks, None, &products, &sq, vectors.len(), mask_seed)
}

/// Client decryption for the folded packing, adding the local `sum a^2`.
pub fn decrypt_folded(ctx: &HeContext, sk: &SecretKey, cts: &[Ciphertext], layout: &PackingLayout, vectors: &[&[u16]]) -> Result<Vec<u16>> {
    let (enc_side, plain_side) = sanity_vectors(layout.k);
    let expected = squared_distance(&enc_side, &plain_side).wrapping_sub(sum_of_squares(&enc_side));
    let raw = decrypt_shares(ctx, sk, cts, layout, vectors.len(), expected)?;
    Ok(raw.into_iter().zip(vectors).map(|(r, a)| r.wrapping_add(sum_of_squares(a))).collect())
}
