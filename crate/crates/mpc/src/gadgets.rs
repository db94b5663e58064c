//! Word-level gadgets over little-endian bit vectors.

use crate::builder::Gates;

pub fn constant_word<G: Gates>(g: &mut G, value: u64, width: usize) -> Vec<G::Bit> {
    (0..width).map(|i| g.constant((value >> i) & 1 == 1)).collect()
}

pub fn xor_word<G: Gates>(g: &mut G, a: &[G::Bit], b: &[G::Bit]) -> Vec<G::Bit> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| g.xor(x, y)).collect()
}

/// Ripple-carry sum with carry-in; one AND per bit, the final carry is dropped.
fn add_with_carry<G: Gates>(g: &mut G, a: &[G::Bit], b: &[G::Bit], mut carry: G::Bit) -> Vec<G::Bit> {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ac = g.xor(a[i], carry);
        let bc = g.xor(b[i], carry);
        out.push(g.xor(ac, b[i]));
        if i + 1 < n {
            let t = g.and(ac, bc);
            carry = g.xor(carry, t);
        }
    }
    out
}

/// `a + b mod 2^n`.
pub fn add<G: Gates>(g: &mut G, a: &[G::Bit], b: &[G::Bit]) -> Vec<G::Bit> {
    let zero = g.constant(false);
    add_with_carry(g, a, b, zero)
}

/// `a - b mod 2^n`.
pub fn sub<G: Gates>(g: &mut G, a: &[G::Bit], b: &[G::Bit]) -> Vec<G::Bit> {
    let nb: Vec<G::Bit> = b.iter().map(|&x| g.not(x)).collect();
    let one = g.constant(true);
    add_with_carry(g, a, &nb, one)
}

/// Unsigned `a < b`; one AND per bit.
pub fn less_than<G: Gates>(g: &mut G, a: &[G::Bit], b: &[G::Bit]) -> G::Bit {
    debug_assert_eq!(a.len(), b.len());
    // Carry out of a + !b + 1 is set exactly when a >= b.
    let mut carry = g.constant(true);
    for i in 0..a.len() {
        let nb = g.not(b[i]);
        let ac = g.xor(a[i], carry);
        let bc = g.xor(nb, carry);
        let t = g.and(ac, bc);
        carry = g.xor(carry, t);
    }
    g.not(carry)
}

pub fn mux_word<G: Gates>(g: &mut G, sel: G::Bit, if0: &[G::Bit], if1: &[G::Bit]) -> Vec<G::Bit> {
    debug_assert_eq!(if0.len(), if1.len());
    if0.iter().zip(if1).map(|(&x, &y)| g.mux(sel, x, y)).collect()
}

pub fn equal<G: Gates>(g: &mut G, a: &[G::Bit], b: &[G::Bit]) -> G::Bit {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = g.constant(true);
    for (&x, &y) in a.iter().zip(b) {
        let d = g.xor(x, y);
        let same = g.not(d);
        acc = g.and(acc, same);
    }
    acc
}

/// Selects `options[index]` with a log-depth tree of multiplexers.
/// `index` is little-endian; out-of-range indices select an unspecified
/// option.
pub fn mux_tree<G: Gates>(g: &mut G, index: &[G::Bit], options: &[Vec<G::Bit>]) -> Vec<G::Bit> {
    assert!(!options.is_empty());
    let mut level: Vec<Vec<G::Bit>> = options.to_vec();
    for &sel in index {
        if level.len() == 1 {
            break;
        }
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            next.push(match pair {
                [a, b] => mux_word(g, sel, a, b),
                [a] => a.clone(),
                _ => unreachable!(),
            });
        }
        level = next;
    }
    level.swap_remove(0)
}

/// Bits needed to index `n` options.
pub fn index_bits(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::Plain;
    use crate::circuit::{from_bits, to_bits};

    fn word(v: u64) -> Vec<bool> {
        to_bits(v, 16)
    }

    #[test]
    fn arithmetic_matches_wrapping_ops() {
        let mut p = Plain;
        for (a, b) in [(0u16, 0u16), (1, 2), (65535, 1), (40000, 30000), (7, 7), (123, 65000)] {
            assert_eq!(from_bits(&add(&mut p, &word(a as u64), &word(b as u64))) as u16, a.wrapping_add(b));
            assert_eq!(from_bits(&sub(&mut p, &word(a as u64), &word(b as u64))) as u16, a.wrapping_sub(b));
            assert_eq!(less_than(&mut p, &word(a as u64), &word(b as u64)), a < b);
            assert_eq!(equal(&mut p, &word(a as u64), &word(b as u64)), a == b);
        }
    }

    #[test]
    fn mux_tree_selects() {
        let mut p = Plain;
        for n in 1..=9usize {
            let options: Vec<Vec<bool>> = (0..n).map(|i| to_bits(i as u64 * 3 + 1, 8)).collect();
            for j in 0..n {
                let idx = to_bits(j as u64, index_bits(n));
                assert_eq!(from_bits(&mux_tree(&mut p, &idx, &options)), j as u64 * 3 + 1, "n={n} j={j}");
            }
        }
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(5), 3);
    }
}
