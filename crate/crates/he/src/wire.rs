//! Ciphertext byte encoding: `u64` parameter digest, `u32` count, then per
//! ciphertext both components limb by limb as little-endian `u64` words.

use crate::bfv::Ciphertext;
use crate::error::{HeError, Result};
use crate::params::HeContext;

const HEADER: usize = 12;

/// Encoded size of `count` ciphertexts.
pub fn encoded_len(ctx: &HeContext, count: usize) -> usize {
    HEADER + count * 2 * ctx.limbs() * ctx.degree() * 8
}

pub fn encode_ciphertexts(ctx: &HeContext, cts: &[Ciphertext]) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(ctx, cts.len()));
    out.extend_from_slice(&ctx.params().digest().to_le_bytes());
    out.extend_from_slice(&(cts.len() as u32).to_le_bytes());
    for ct in cts {
        for w in ct.c0.iter().chain(&ct.c1) {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

/// Decodes ciphertexts. The noise estimate cannot travel with the bytes, so
/// decoded ciphertexts are assumed fresh.
pub fn decode_ciphertexts(ctx: &HeContext, bytes: &[u8]) -> Result<Vec<Ciphertext>> {
    if bytes.len() < HEADER {
        return Err(HeError::Malformed("short header".into()));
    }
    let digest = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    if digest != ctx.params().digest() {
        return Err(HeError::ParamsMismatch);
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() != encoded_len(ctx, count) {
        return Err(HeError::Malformed(format!("{} bytes for {count} ciphertexts", bytes.len())));
    }
    let d = ctx.degree();
    let words = ctx.limbs() * d;
    let mut it = bytes[HEADER..].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap()));
    let fresh = ctx.fresh_noise_bits(6.0 * ctx.params().noise_std * (2.0 * d as f64 + 1.0));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let comp = |it: &mut dyn Iterator<Item = u64>| -> Result<Vec<u64>> {
            let v: Vec<u64> = it.take(words).collect();
            for (limb, chunk) in v.chunks(d).enumerate() {
                let p = ctx.params().moduli[limb];
                if chunk.iter().any(|&w| w >= p) {
                    return Err(HeError::Malformed("residue out of range".into()));
                }
            }
            Ok(v)
        };
        let c0 = comp(&mut it)?;
        let c1 = comp(&mut it)?;
        out.push(Ciphertext { c0, c1, noise_bits: fresh });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfv::{decrypt, encrypt_sk, keygen, PlainPoly};
    use crate::params::HeParams;
    use rand::SeedableRng;

    #[test]
    fn round_trip_and_size() {
        let ctx = HeContext::new(HeParams::default()).unwrap();
        let (sk, _) = keygen(&ctx, 1);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let mut coeffs = vec![0u64; ctx.degree()];
        coeffs[3] = 99;
        let pt = PlainPoly::new(&ctx, coeffs).unwrap();
        let cts = vec![encrypt_sk(&ctx, &sk, &pt, &mut rng), encrypt_sk(&ctx, &sk, &pt, &mut rng)];
        let bytes = encode_ciphertexts(&ctx, &cts);
        assert_eq!(bytes.len(), encoded_len(&ctx, 2));
        assert_eq!(bytes.len(), 12 + 2 * 2 * 2 * 4096 * 8);
        let back = decode_ciphertexts(&ctx, &bytes).unwrap();
        assert_eq!(decrypt(&ctx, &sk, &back[1]), pt);
        assert!(decode_ciphertexts(&ctx, &bytes[..bytes.len() - 8]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] ^= 1;
        assert_eq!(decode_ciphertexts(&ctx, &wrong).unwrap_err(), HeError::ParamsMismatch);
    }
}
