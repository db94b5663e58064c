//! BFV key generation, encryption, decryption and the linear operations the
//! distance kernel needs. Ciphertext components are kept in NTT form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{HeError, Result};
use crate::params::HeContext;

/// Plaintext polynomial with `degree` coefficients in `[0, t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlainPoly {
    coeffs: Vec<u64>,
}

impl PlainPoly {
    pub fn zero(degree: usize) -> Self {
        Self { coeffs: vec![0; degree] }
    }

    pub fn new(ctx: &HeContext, coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.len() != ctx.degree() {
            return Err(HeError::LayoutMismatch(format!("{} coefficients for degree {}", coeffs.len(), ctx.degree())));
        }
        let t = ctx.plain_modulus();
        if let Some(&value) = coeffs.iter().find(|&&c| c >= t) {
            return Err(HeError::CoefficientOutOfRange { value, modulus: t });
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

}

#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) c0: Vec<u64>,
    pub(crate) c1: Vec<u64>,
    /// Estimated log2 bound on the decryption noise.
    pub(crate) noise_bits: f64,
}

impl Ciphertext {
    pub fn noise_bits(&self) -> f64 {
        self.noise_bits
    }

    /// Bits of estimated budget left before decryption may fail.
    pub fn budget_estimate(&self, ctx: &HeContext) -> f64 {
        (ctx.0.delta as f64).log2() - 1.0 - self.noise_bits
    }
}

#[derive(Clone)]
pub struct SecretKey {
    s: Vec<u64>,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    p0: Vec<u64>,
    p1: Vec<u64>,
}

fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

impl HeContext {
    fn ntt_all(&self, v: &mut [u64]) {
        let d = self.degree();
        for (limb, t) in v.chunks_exact_mut(d).zip(&self.0.tables) {
            t.forward(limb);
        }
    }

    fn intt_all(&self, v: &mut [u64]) {
        let d = self.degree();
        for (limb, t) in v.chunks_exact_mut(d).zip(&self.0.tables) {
            t.inverse(limb);
        }
    }

    /// Signed small coefficients into NTT-form RNS.
    pub(crate) fn lift_signed(&self, coeffs: &[i128]) -> Vec<u64> {
        let mut out = Vec::with_capacity(coeffs.len() * self.limbs());
        for t in &self.0.tables {
            out.extend(coeffs.iter().map(|&c| t.modulus.reduce_i128(c)));
        }
        self.ntt_all(&mut out);
        out
    }

    /// Plaintext lifted with centered representatives, NTT form.
    pub(crate) fn lift_plain(&self, pt: &PlainPoly) -> Vec<u64> {
        let t = self.plain_modulus() as i128;
        let signed: Vec<i128> = pt.coeffs.iter().map(|&c| if (c as i128) > t / 2 { c as i128 - t } else { c as i128 }).collect();
        self.lift_signed(&signed)
    }

    /// `floor(q / t) * m` in NTT form.
    pub(crate) fn scale_plain(&self, pt: &PlainPoly) -> Vec<u64> {
        let mut out = Vec::with_capacity(pt.coeffs.len() * self.limbs());
        for (t, &dm) in self.0.tables.iter().zip(&self.0.delta_mod) {
            out.extend(pt.coeffs.iter().map(|&c| t.modulus.mul(t.modulus.reduce(c), dm)));
        }
        self.ntt_all(&mut out);
        out
    }

    fn pointwise(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let d = self.degree();
        let mut out = Vec::with_capacity(a.len());
        for (i, t) in self.0.tables.iter().enumerate() {
            let r = i * d..(i + 1) * d;
            out.extend(a[r.clone()].iter().zip(&b[r]).map(|(&x, &y)| t.modulus.mul(x, y)));
        }
        out
    }

    fn add_into(&self, acc: &mut [u64], b: &[u64]) {
        let d = self.degree();
        for (i, t) in self.0.tables.iter().enumerate() {
            for (x, &y) in acc[i * d..(i + 1) * d].iter_mut().zip(&b[i * d..(i + 1) * d]) {
                *x = t.modulus.add(*x, y);
            }
        }
    }

    fn sub_into(&self, acc: &mut [u64], b: &[u64]) {
        let d = self.degree();
        for (i, t) in self.0.tables.iter().enumerate() {
            for (x, &y) in acc[i * d..(i + 1) * d].iter_mut().zip(&b[i * d..(i + 1) * d]) {
                *x = t.modulus.sub(*x, y);
            }
        }
    }

    fn uniform(&self, rng: &mut impl Rng) -> Vec<u64> {
        let d = self.degree();
        let mut out = Vec::with_capacity(d * self.limbs());
        for t in &self.0.tables {
            let p = t.modulus.value();
            out.extend((0..d).map(|_| rng.gen_range(0..p)));
        }
        out
    }

    fn ternary(&self, rng: &mut impl Rng) -> Vec<i128> {
        (0..self.degree()).map(|_| rng.gen_range(-1i128..=1)).collect()
    }

    fn gaussian(&self, rng: &mut impl Rng) -> Vec<i128> {
        let sigma = self.params().noise_std;
        let normal = Normal::new(0.0, sigma).expect("positive deviation");
        let bound = (6.0 * sigma).ceil();
        (0..self.degree())
            .map(|_| loop {
                let x: f64 = normal.sample(rng);
                if x.abs() <= bound {
                    break x.round() as i128;
                }
            })
            .collect()
    }

    /// `q mod t`; decryption sees it multiplied by the message.
    fn rounding_bits(&self) -> f64 {
        ((self.0.q % self.plain_modulus() as u128) as f64).max(1.0).log2()
    }

    pub(crate) fn fresh_noise_bits(&self, error_bound: f64) -> f64 {
        log2_add(error_bound.log2(), self.rounding_bits())
    }

    /// Cost in bits of multiplying by a plaintext with centered coefficients.
    fn mul_plain_growth(&self, noise_bits: f64) -> f64 {
        let d = self.degree() as f64;
        let t = self.plain_modulus() as f64;
        log2_add(noise_bits + (d * t / 2.0).log2(), self.rounding_bits() + (d * t / 2.0).log2())
    }
}

/// Generates a ternary secret and an RLWE public key, deterministic per seed.
pub fn keygen(ctx: &HeContext, seed: u64) -> (SecretKey, PublicKey) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let s = ctx.lift_signed(&ctx.ternary(&mut rng));
    let a = ctx.uniform(&mut rng);
    let e = ctx.lift_signed(&ctx.gaussian(&mut rng));
    // p0 = -(a s) + e, p1 = a
    let mut p0 = e;
    ctx.sub_into(&mut p0, &ctx.pointwise(&a, &s));
    (SecretKey { s }, PublicKey { p0, p1: a })
}

/// Symmetric encryption: `(-(a s) + e + delta m, a)`.
pub fn encrypt_sk(ctx: &HeContext, sk: &SecretKey, pt: &PlainPoly, rng: &mut impl Rng) -> Ciphertext {
    let a = ctx.uniform(rng);
    let mut c0 = ctx.lift_signed(&ctx.gaussian(rng));
    ctx.sub_into(&mut c0, &ctx.pointwise(&a, &sk.s));
    ctx.add_into(&mut c0, &ctx.scale_plain(pt));
    Ciphertext { c0, c1: a, noise_bits: ctx.fresh_noise_bits(6.0 * ctx.params().noise_std) }
}

/// Public-key encryption: `(p0 u + e1 + delta m, p1 u + e2)`.
pub fn encrypt_pk(ctx: &HeContext, pk: &PublicKey, pt: &PlainPoly, rng: &mut impl Rng) -> Ciphertext {
    let u = ctx.lift_signed(&ctx.ternary(rng));
    let mut c0 = ctx.pointwise(&pk.p0, &u);
    ctx.add_into(&mut c0, &ctx.lift_signed(&ctx.gaussian(rng)));
    ctx.add_into(&mut c0, &ctx.scale_plain(pt));
    let mut c1 = ctx.pointwise(&pk.p1, &u);
    ctx.add_into(&mut c1, &ctx.lift_signed(&ctx.gaussian(rng)));
    let e = 6.0 * ctx.params().noise_std;
    let noise_bits = ctx.fresh_noise_bits(e * (2.0 * ctx.degree() as f64 + 1.0));
    Ciphertext { c0, c1, noise_bits }
}

/// `c0 + c1 s` as coefficients in `[0, q)`.
fn phase(ctx: &HeContext, sk: &SecretKey, ct: &Ciphertext) -> Vec<u128> {
    let mut v = ctx.pointwise(&ct.c1, &sk.s);
    ctx.add_into(&mut v, &ct.c0);
    ctx.intt_all(&mut v);
    let d = ctx.degree();
    (0..d).map(|j| ctx.crt((0..ctx.limbs()).map(|i| v[i * d + j]))).collect()
}

pub fn decrypt(ctx: &HeContext, sk: &SecretKey, ct: &Ciphertext) -> PlainPoly {
    let (q, t) = (ctx.0.q, ctx.plain_modulus() as u128);
    let coeffs = phase(ctx, sk, ct).into_iter().map(|x| (((t * x + q / 2) / q) % t) as u64).collect();
    PlainPoly { coeffs }
}

/// Exact remaining noise budget in bits, measured through the secret key.
pub fn noise_budget(ctx: &HeContext, sk: &SecretKey, ct: &Ciphertext) -> f64 {
    let (q, t) = (ctx.0.q, ctx.plain_modulus() as u128);
    let worst = phase(ctx, sk, ct)
        .into_iter()
        .map(|x| {
            let v = (t * x) % q;
            v.min(q - v)
        })
        .max()
        .unwrap_or(0);
    let q_bits = (q as f64).log2();
    (q_bits - (worst.max(1) as f64).log2() - 1.0).max(0.0)
}

fn same_shape(ctx: &HeContext, ct: &Ciphertext) -> Result<()> {
    let n = ctx.degree() * ctx.limbs();
    if ct.c0.len() != n || ct.c1.len() != n {
        return Err(HeError::ParamsMismatch);
    }
    Ok(())
}

pub fn add(ctx: &HeContext, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    same_shape(ctx, a)?;
    same_shape(ctx, b)?;
    let mut out = a.clone();
    ctx.add_into(&mut out.c0, &b.c0);
    ctx.add_into(&mut out.c1, &b.c1);
    out.noise_bits = log2_add(a.noise_bits, b.noise_bits);
    Ok(out)
}

pub fn sub(ctx: &HeContext, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    same_shape(ctx, a)?;
    same_shape(ctx, b)?;
    let mut out = a.clone();
    ctx.sub_into(&mut out.c0, &b.c0);
    ctx.sub_into(&mut out.c1, &b.c1);
    out.noise_bits = log2_add(a.noise_bits, b.noise_bits);
    Ok(out)
}

pub fn add_plain(ctx: &HeContext, ct: &Ciphertext, pt: &PlainPoly) -> Result<Ciphertext> {
    same_shape(ctx, ct)?;
    let mut out = ct.clone();
    ctx.add_into(&mut out.c0, &ctx.scale_plain(pt));
    out.noise_bits = log2_add(ct.noise_bits, ctx.rounding_bits());
    Ok(out)
}

pub fn mul_plain(ctx: &HeContext, ct: &Ciphertext, pt: &PlainPoly) -> Result<Ciphertext> {
    same_shape(ctx, ct)?;
    let p = ctx.lift_plain(pt);
    Ok(Ciphertext {
        c0: ctx.pointwise(&ct.c0, &p),
        c1: ctx.pointwise(&ct.c1, &p),
        noise_bits: ctx.mul_plain_growth(ct.noise_bits),
    })
}

/// Adds uniform noise of `flood_bits` magnitude to hide the evaluator's
/// plaintext operands from the decryptor.
pub fn flood(ctx: &HeContext, ct: &mut Ciphertext, rng: &mut impl Rng) {
    let bound = 1i128 << ctx.params().flood_bits;
    let noise: Vec<i128> = (0..ctx.degree()).map(|_| rng.gen_range(-bound..=bound)).collect();
    ctx.add_into(&mut ct.c0, &ctx.lift_signed(&noise));
    ct.noise_bits = log2_add(ct.noise_bits, ctx.params().flood_bits as f64);
}
