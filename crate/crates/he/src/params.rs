use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::arith::{is_prime, ntt_prime, Modulus};
use crate::error::{HeError, Result};
use crate::ntt::NttTable;

/// Largest total ciphertext-modulus bit length at 128-bit classical security
/// for a ternary secret (HomomorphicEncryption.org standard table).
pub fn max_modulus_bits(degree: usize) -> Option<u32> {
    match degree {
        1024 => Some(27),
        2048 => Some(54),
        4096 => Some(109),
        8192 => Some(218),
        16384 => Some(438),
        32768 => Some(881),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeParams {
    pub degree: usize,
    /// RNS limbs of the ciphertext modulus.
    pub moduli: Vec<u64>,
    pub plain_modulus: u64,
    pub noise_std: f64,
    /// Magnitude in bits of the noise added before results leave the cloud.
    pub flood_bits: u32,
}

impl Default for HeParams {
    fn default() -> Self {
        Self::with_limb_bits(4096, &[55, 54], 1 << 16, 3.2).expect("default parameters are valid")
    }
}

impl HeParams {
    /// Picks the largest NTT-friendly primes of the requested sizes.
    pub fn with_limb_bits(degree: usize, limb_bits: &[u32], plain_modulus: u64, noise_std: f64) -> Result<Self> {
        if !degree.is_power_of_two() || degree < 2 {
            return Err(HeError::InvalidParams(format!("degree {degree} is not a power of two")));
        }
        let mut moduli = Vec::with_capacity(limb_bits.len());
        for &b in limb_bits {
            if !(20..=61).contains(&b) {
                return Err(HeError::InvalidParams(format!("limb size {b} bits unsupported")));
            }
            let p = ntt_prime(b, degree, &moduli)
                .ok_or_else(|| HeError::InvalidParams(format!("no {b}-bit prime = 1 mod {}", 2 * degree)))?;
            moduli.push(p);
        }
        let q_bits: f64 = moduli.iter().map(|&p| (p as f64).log2()).sum();
        let params = Self { degree, moduli, plain_modulus, noise_std, flood_bits: (q_bits as u32).saturating_sub(39) };
        params.validate()?;
        Ok(params)
    }

    /// Bit length of the ciphertext modulus.
    pub fn modulus_bits(&self) -> u32 {
        let q = self.modulus();
        128 - q.leading_zeros()
    }

    /// Product of the limbs.
    pub fn modulus(&self) -> u128 {
        self.moduli.iter().fold(1u128, |acc, &p| acc.saturating_mul(p as u128))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.degree.is_power_of_two() || self.degree < 2 {
            return Err(HeError::InvalidParams(format!("degree {} is not a power of two", self.degree)));
        }
        if self.moduli.is_empty() {
            return Err(HeError::InvalidParams("no ciphertext moduli".into()));
        }
        for (i, &p) in self.moduli.iter().enumerate() {
            if p >= 1 << 62 || !is_prime(p) || p % (2 * self.degree as u64) != 1 {
                return Err(HeError::InvalidParams(format!("limb {p} is not an NTT prime for degree {}", self.degree)));
            }
            if self.moduli[..i].contains(&p) {
                return Err(HeError::InvalidParams("repeated limb".into()));
            }
        }
        let bits: f64 = self.moduli.iter().map(|&p| (p as f64).log2()).sum();
        let t_bits = 64 - self.plain_modulus.leading_zeros();
        if self.plain_modulus < 2 || t_bits > 20 {
            return Err(HeError::InvalidParams(format!("plaintext modulus {} unsupported", self.plain_modulus)));
        }
        // Decryption scales by t inside a u128.
        if bits + t_bits as f64 >= 127.0 {
            return Err(HeError::InvalidParams("ciphertext modulus too large for u128 decryption".into()));
        }
        if (self.plain_modulus as u128) >= self.modulus() {
            return Err(HeError::InvalidParams("plaintext modulus must be below q".into()));
        }
        if !(self.noise_std > 0.0) {
            return Err(HeError::InvalidParams("noise deviation must be positive".into()));
        }
        match max_modulus_bits(self.degree) {
            Some(max) if self.modulus_bits() <= max => Ok(()),
            Some(max) => Err(HeError::InsecureParams(format!(
                "log2 q = {} exceeds {max} bits allowed at degree {}",
                self.modulus_bits(),
                self.degree
            ))),
            None => Err(HeError::InsecureParams(format!("degree {} has no 128-bit security entry", self.degree))),
        }
    }

    /// Stable fingerprint carried in ciphertext encodings.
    pub fn digest(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.degree as u64).to_le_bytes());
        for p in &self.moduli {
            h.update(p.to_le_bytes());
        }
        h.update(self.plain_modulus.to_le_bytes());
        h.update(self.noise_std.to_bits().to_le_bytes());
        h.update(self.flood_bits.to_le_bytes());
        u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
    }
}

pub(crate) struct ContextInner {
    pub params: HeParams,
    pub tables: Vec<NttTable>,
    pub q: u128,
    /// floor(q / t)
    pub delta: u128,
    pub delta_mod: Vec<u64>,
    /// Garner constants: inverse of the product of earlier limbs mod each limb.
    pub garner: Vec<u64>,
}

/// Validated parameters with precomputed NTT tables; cheap to clone.
#[derive(Clone)]
pub struct HeContext(pub(crate) Arc<ContextInner>);

impl std::fmt::Debug for HeContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeContext").field("params", &self.0.params).finish()
    }
}

impl HeContext {
    pub fn new(params: HeParams) -> Result<Self> {
        params.validate()?;
        let tables: Vec<NttTable> = params.moduli.iter().map(|&p| NttTable::new(Modulus::new(p), params.degree)).collect();
        let q = params.modulus();
        let delta = q / params.plain_modulus as u128;
        let delta_mod = params.moduli.iter().map(|&p| (delta % p as u128) as u64).collect();
        let mut garner = Vec::with_capacity(params.moduli.len());
        for (i, t) in tables.iter().enumerate() {
            let m = t.modulus;
            let prefix = params.moduli[..i].iter().fold(1u64, |acc, &p| m.mul(acc, m.reduce(p)));
            garner.push(m.inv(prefix));
        }
        Ok(Self(Arc::new(ContextInner { params, tables, q, delta, delta_mod, garner })))
    }

    pub fn params(&self) -> &HeParams {
        &self.0.params
    }

    pub fn degree(&self) -> usize {
        self.0.params.degree
    }

    pub fn limbs(&self) -> usize {
        self.0.tables.len()
    }

    pub fn plain_modulus(&self) -> u64 {
        self.0.params.plain_modulus
    }

    /// Recombines one coefficient from its residues.
    pub(crate) fn crt(&self, residues: impl Iterator<Item = u64>) -> u128 {
        let mut x: u128 = 0;
        let mut radix: u128 = 1;
        for (i, r) in residues.enumerate() {
            let m = self.0.tables[i].modulus;
            let x_mod = (x % m.value() as u128) as u64;
            let digit = m.mul(m.sub(r, x_mod), self.0.garner[i]);
            x += radix * digit as u128;
            radix *= m.value() as u128;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameters() {
        let p = HeParams::default();
        assert_eq!(p.degree, 4096);
        assert_eq!(p.modulus_bits(), 109);
        assert_eq!(p.plain_modulus, 1 << 16);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn oversized_modulus_is_insecure() {
        let err = HeParams::with_limb_bits(4096, &[55, 55], 1 << 16, 3.2).unwrap_err();
        assert!(matches!(err, HeError::InsecureParams(_)), "{err:?}");
        let err = HeParams::with_limb_bits(2048, &[40, 40], 1 << 16, 3.2).unwrap_err();
        assert!(matches!(err, HeError::InsecureParams(_)));
        assert!(matches!(HeParams::with_limb_bits(1000, &[40], 1 << 16, 3.2), Err(HeError::InvalidParams(_))));
    }

    #[test]
    fn crt_recombines() {
        let ctx = HeContext::new(HeParams::default()).unwrap();
        let q = ctx.0.q;
        for x in [0u128, 1, q - 1, q / 3, 0xdead_beef_cafe_babe_1234] {
            let res = ctx.params().moduli.iter().map(|&p| (x % p as u128) as u64);
            assert_eq!(ctx.crt(res), x);
        }
    }

    #[test]
    fn digest_tracks_parameters() {
        let a = HeParams::default();
        let mut b = a.clone();
        b.noise_std = 3.3;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), HeParams::default().digest());
    }
}
