//! Word-sized modular arithmetic and NTT-friendly prime search.

/// An odd modulus below 2^62 with a Barrett constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    p: u64,
    bits: u32,
    /// floor(2^(2 * bits) / p)
    barrett: u128,
}

impl Modulus {
    pub fn new(p: u64) -> Self {
        assert!(p > 2 && p < (1 << 62), "modulus out of range");
        let bits = 64 - p.leading_zeros();
        let barrett = (1u128 << (2 * bits)) / p as u128;
        Self { p, bits, barrett }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.p
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Reduces `x < p^2`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let q = ((x >> (self.bits - 1)) * self.barrett) >> (self.bits + 1);
        let mut r = (x - q * self.p as u128) as u64;
        while r >= self.p {
            r -= self.p;
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.p {
            x
        } else {
            x % self.p
        }
    }

    /// Reduces a signed value into `[0, p)`.
    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        let r = x.rem_euclid(self.p as i128);
        r as u64
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse for prime moduli.
    pub fn inv(&self, a: u64) -> u64 {
        self.pow(a, self.p - 2)
    }

    /// Shoup companion `floor(w * 2^64 / p)` of a fixed multiplicand.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.p as u128) as u64
    }

    /// `x * w mod p` given `w_shoup = shoup(w)`, result in `[0, 2p)`.
    #[inline]
    pub fn mul_shoup_lazy(&self, x: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((x as u128 * w_shoup as u128) >> 64) as u64;
        x.wrapping_mul(w).wrapping_sub(q.wrapping_mul(self.p))
    }
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u64(acc, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest primes below `2^bits` congruent to 1 mod `2 * degree`, skipping
/// any listed in `exclude`.
pub fn ntt_prime(bits: u32, degree: usize, exclude: &[u64]) -> Option<u64> {
    let step = 2 * degree as u64;
    let top = 1u64 << bits;
    let mut c = top - (top - 1) % step;
    while c > top >> 1 {
        if is_prime(c) && !exclude.contains(&c) {
            return Some(c);
        }
        c -= step;
    }
    None
}

/// A primitive `2 * degree`-th root of unity mod prime `p`.
pub fn primitive_root(m: &Modulus, degree: usize) -> u64 {
    let order = 2 * degree as u64;
    let p = m.value();
    for g in 2..p {
        let w = m.pow(g, (p - 1) / order);
        if m.pow(w, degree as u64) == p - 1 {
            return w;
        }
    }
    unreachable!("p = 1 mod 2d always has a primitive 2d-th root")
}
