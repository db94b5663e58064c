//! Negacyclic number-theoretic transform over `Z_p[x] / (x^d + 1)`.
//!
//! Forward is Cooley-Tukey on bit-reversed powers of a primitive `2d`-th
//! root, producing bit-reversed output; inverse is the matching
//! Gentleman-Sande pass. Pointwise products in between give negacyclic
//! convolution.

use crate::arith::{primitive_root, Modulus};

#[derive(Clone, Debug)]
pub struct NttTable {
    pub modulus: Modulus,
    degree: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl NttTable {
    pub fn new(modulus: Modulus, degree: usize) -> Self {
        assert!(degree.is_power_of_two() && degree >= 2);
        let bits = degree.trailing_zeros();
        let psi = primitive_root(&modulus, degree);
        let psi_inv = modulus.inv(psi);
        let mut psi_rev = vec![0; degree];
        let mut psi_inv_rev = vec![0; degree];
        let (mut pw, mut pw_inv) = (1u64, 1u64);
        for i in 0..degree {
            let r = bit_reverse(i, bits);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(degree as u64);
        Self {
            modulus,
            degree,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    fn mul_w(&self, x: u64, w: u64, ws: u64) -> u64 {
        let r = self.modulus.mul_shoup_lazy(x, w, ws);
        let p = self.modulus.value();
        if r >= p {
            r - p
        } else {
            r
        }
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let m_ = &self.modulus;
        let n = self.degree;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let (w, ws) = (self.psi_rev[m + i], self.psi_rev_shoup[m + i]);
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = self.mul_w(a[j + t], w, ws);
                    a[j] = m_.add(u, v);
                    a[j + t] = m_.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let m_ = &self.modulus;
        let n = self.degree;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let (w, ws) = (self.psi_inv_rev[h + i], self.psi_inv_rev_shoup[h + i]);
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = m_.add(u, v);
                    a[j + t] = self.mul_w(m_.sub(u, v), w, ws);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = self.mul_w(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ntt_prime;

    fn schoolbook(a: &[u64], b: &[u64], m: &Modulus) -> Vec<u64> {
        let n = a.len();
        let mut out = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                let prod = m.mul(a[i], b[j]);
                let k = i + j;
                if k < n {
                    out[k] = m.add(out[k], prod);
                } else {
                    out[k - n] = m.sub(out[k - n], prod);
                }
            }
        }
        out
    }

    #[test]
    fn round_trip_and_negacyclic_product() {
        for n in [8usize, 64, 256] {
            let m = Modulus::new(ntt_prime(50, n, &[]).unwrap());
            let table = NttTable::new(m, n);
            let a: Vec<u64> = (0..n as u64).map(|i| (i * 7919 + 3) % m.value()).collect();
            let b: Vec<u64> = (0..n as u64).map(|i| (i * i * 104_729 + 11) % m.value()).collect();
            let mut fa = a.clone();
            table.forward(&mut fa);
            let mut back = fa.clone();
            table.inverse(&mut back);
            assert_eq!(back, a);
            let mut fb = b.clone();
            table.forward(&mut fb);
            let mut prod: Vec<u64> = fa.iter().zip(&fb).map(|(&x, &y)| m.mul(x, y)).collect();
            table.inverse(&mut prod);
            assert_eq!(prod, schoolbook(&a, &b, &m));
        }
    }

    #[test]
    fn x_to_the_n_is_minus_one() {
        let n = 16;
        let m = Modulus::new(ntt_prime(40, n, &[]).unwrap());
        let t = NttTable::new(m, n);
        let mut x = vec![0u64; n];
        x[n - 1] = 1;
        let mut y = vec![0u64; n];
        y[1] = 1;
        t.forward(&mut x);
        t.forward(&mut y);
        let mut p: Vec<u64> = x.iter().zip(&y).map(|(&a, &b)| m.mul(a, b)).collect();
        t.inverse(&mut p);
        let mut want = vec![0u64; n];
        want[0] = m.value() - 1;
        assert_eq!(p, want);
    }
}
