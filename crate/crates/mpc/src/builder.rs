//! Circuit construction with constant folding, behind a [`Gates`] trait that
//! also has a plain boolean implementation.

use crate::circuit::{Circuit, Disclosure, Gate, GateKind, Output, WireId, ZERO_WIRE};

/// Bit-level operations shared by the circuit builder and plain evaluation.
pub trait Gates {
    type Bit: Copy;

    fn constant(&mut self, v: bool) -> Self::Bit;
    fn xor(&mut self, a: Self::Bit, b: Self::Bit) -> Self::Bit;
    fn and(&mut self, a: Self::Bit, b: Self::Bit) -> Self::Bit;
    fn not(&mut self, a: Self::Bit) -> Self::Bit;

    fn or(&mut self, a: Self::Bit, b: Self::Bit) -> Self::Bit {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `if1` when `sel`, else `if0`; one AND.
    fn mux(&mut self, sel: Self::Bit, if0: Self::Bit, if1: Self::Bit) -> Self::Bit {
        let d = self.xor(if0, if1);
        let m = self.and(sel, d);
        self.xor(if0, m)
    }
}

/// Evaluates gadgets directly on booleans.
#[derive(Clone, Copy, Debug, Default)]
pub struct Plain;

impl Gates for Plain {
    type Bit = bool;

    fn constant(&mut self, v: bool) -> bool {
        v
    }
    fn xor(&mut self, a: bool, b: bool) -> bool {
        a ^ b
    }
    fn and(&mut self, a: bool, b: bool) -> bool {
        a & b
    }
    fn not(&mut self, a: bool) -> bool {
        !a
    }
}

/// A builder bit: either known at construction time or carried on a wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bit {
    Const(bool),
    Wire(WireId),
}

pub struct Builder {
    garbler_inputs: u32,
    evaluator_inputs: u32,
    next: WireId,
    gates: Vec<Gate>,
    outputs: Vec<(Bit, Disclosure)>,
}

impl Builder {
    pub fn new(garbler_inputs: usize, evaluator_inputs: usize) -> Self {
        let (g, e) = (garbler_inputs as u32, evaluator_inputs as u32);
        Self { garbler_inputs: g, evaluator_inputs: e, next: 1 + g + e, gates: Vec::new(), outputs: Vec::new() }
    }

    pub fn garbler_inputs(&self) -> Vec<Bit> {
        (0..self.garbler_inputs).map(|i| Bit::Wire(1 + i)).collect()
    }

    pub fn evaluator_inputs(&self) -> Vec<Bit> {
        (0..self.evaluator_inputs).map(|i| Bit::Wire(1 + self.garbler_inputs + i)).collect()
    }

    fn gate(&mut self, kind: GateKind, a: WireId, b: WireId) -> Bit {
        let out = self.next;
        self.next += 1;
        self.gates.push(Gate { kind, a, b, out });
        Bit::Wire(out)
    }

    pub fn output(&mut self, bits: &[Bit], to: Disclosure) {
        self.outputs.extend(bits.iter().map(|&b| (b, to)));
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::And).count()
    }

    pub fn finish(mut self) -> Circuit {
        let mut one = None;
        let pending = std::mem::take(&mut self.outputs);
        let mut outputs = Vec::with_capacity(pending.len());
        for (bit, to) in pending {
            let wire = match bit {
                Bit::Wire(w) => w,
                Bit::Const(false) => ZERO_WIRE,
                Bit::Const(true) => *one.get_or_insert_with(|| match self.gate(GateKind::Not, ZERO_WIRE, ZERO_WIRE) {
                    Bit::Wire(w) => w,
                    Bit::Const(_) => unreachable!(),
                }),
            };
            outputs.push(Output { wire, to });
        }
        Circuit {
            wires: self.next,
            garbler_inputs: self.garbler_inputs,
            evaluator_inputs: self.evaluator_inputs,
            gates: self.gates,
            outputs,
        }
    }
}

impl Gates for Builder {
    type Bit = Bit;

    fn constant(&mut self, v: bool) -> Bit {
        Bit::Const(v)
    }

    fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x ^ y),
            (Bit::Const(false), w) | (w, Bit::Const(false)) => w,
            (Bit::Const(true), w) | (w, Bit::Const(true)) => self.not(w),
            (Bit::Wire(x), Bit::Wire(y)) if x == y => Bit::Const(false),
            (Bit::Wire(x), Bit::Wire(y)) => self.gate(GateKind::Xor, x, y),
        }
    }

    fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x & y),
            (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::Const(false),
            (Bit::Const(true), w) | (w, Bit::Const(true)) => w,
            (Bit::Wire(x), Bit::Wire(y)) if x == y => a,
            (Bit::Wire(x), Bit::Wire(y)) => self.gate(GateKind::And, x, y),
        }
    }

    fn not(&mut self, a: Bit) -> Bit {
        match a {
            Bit::Const(x) => Bit::Const(!x),
            Bit::Wire(x) => self.gate(GateKind::Not, x, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_fold_away() {
        let mut b = Builder::new(1, 1);
        let g = b.garbler_inputs()[0];
        let e = b.evaluator_inputs()[0];
        let t = b.constant(true);
        let f = b.constant(false);
        assert_eq!(b.and(g, f), Bit::Const(false));
        assert_eq!(b.and(g, t), g);
        assert_eq!(b.xor(e, f), e);
        assert_eq!(b.xor(e, e), Bit::Const(false));
        assert_eq!(b.and_count(), 0);
        let x = b.and(g, e);
        b.output(&[x, t, f], Disclosure::ToClient);
        let c = b.finish();
        c.validate().unwrap();
        assert_eq!(c.and_count(), 1);
        assert_eq!(c.evaluate(&[true], &[true]).unwrap(), vec![true, true, false]);
        assert_eq!(c.evaluate(&[true], &[false]).unwrap(), vec![false, true, false]);
    }
}
