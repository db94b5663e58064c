//! Boolean circuits over XOR, AND and NOT gates.
//!
//! Wire 0 always carries the constant `false`. Inputs occupy the wires right
//! after it, garbler inputs first; gate outputs follow in topological order.

use sha2::{Digest, Sha256};

use crate::error::{MpcError, Result};

pub type WireId = u32;

/// The constant-zero wire present in every circuit.
pub const ZERO_WIRE: WireId = 0;

/// Bumped whenever a library circuit changes shape.
pub const LIBRARY_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Xor,
    And,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub a: WireId,
    /// Unused by `Not`, which sets it equal to `a`.
    pub b: WireId,
    pub out: WireId,
}

/// Who learns an output bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Disclosure {
    ToClient,
    ToCloud,
    ToBoth,
}

impl Disclosure {
    pub fn client_sees(self) -> bool {
        matches!(self, Disclosure::ToClient | Disclosure::ToBoth)
    }

    pub fn cloud_sees(self) -> bool {
        matches!(self, Disclosure::ToCloud | Disclosure::ToBoth)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Output {
    pub wire: WireId,
    pub to: Disclosure,
}

/// A circuit between the cloud (garbler) and the client (evaluator).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub wires: u32,
    pub garbler_inputs: u32,
    pub evaluator_inputs: u32,
    pub gates: Vec<Gate>,
    pub outputs: Vec<Output>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CircuitStats {
    pub and: usize,
    pub xor: usize,
    pub not: usize,
}

impl Circuit {
    pub fn garbler_input_wire(&self, i: usize) -> WireId {
        1 + i as WireId
    }

    pub fn evaluator_input_wire(&self, i: usize) -> WireId {
        1 + self.garbler_inputs + i as WireId
    }

    fn first_gate_wire(&self) -> u32 {
        1 + self.garbler_inputs + self.evaluator_inputs
    }

    pub fn stats(&self) -> CircuitStats {
        let mut s = CircuitStats::default();
        for g in &self.gates {
            match g.kind {
                GateKind::And => s.and += 1,
                GateKind::Xor => s.xor += 1,
                GateKind::Not => s.not += 1,
            }
        }
        s
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::And).count()
    }

    /// Checks topological order, single assignment and output wires.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MpcError::MalformedCircuit(m));
        let first = self.first_gate_wire() as u64;
        if first + self.gates.len() as u64 != self.wires as u64 {
            return bad(format!("{} wires for {} inputs and {} gates", self.wires, first, self.gates.len()));
        }
        for (i, g) in self.gates.iter().enumerate() {
            let out = first + i as u64;
            if g.out as u64 != out {
                return bad(format!("gate {i} writes wire {} instead of {out}", g.out));
            }
            if g.a as u64 >= out || g.b as u64 >= out {
                return bad(format!("gate {i} reads a wire that is not yet assigned"));
            }
            if g.kind == GateKind::Not && g.a != g.b {
                return bad(format!("NOT gate {i} has two inputs"));
            }
        }
        if let Some(o) = self.outputs.iter().find(|o| o.wire >= self.wires) {
            return bad(format!("output wire {} does not exist", o.wire));
        }
        Ok(())
    }

    /// Plain evaluation; returns every output bit in order.
    pub fn evaluate(&self, garbler: &[bool], evaluator: &[bool]) -> Result<Vec<bool>> {
        check_len("garbler inputs", self.garbler_inputs as usize, garbler.len())?;
        check_len("evaluator inputs", self.evaluator_inputs as usize, evaluator.len())?;
        let mut w = Vec::with_capacity(self.wires as usize);
        w.push(false);
        w.extend_from_slice(garbler);
        w.extend_from_slice(evaluator);
        for g in &self.gates {
            let (a, b) = (w[g.a as usize], w[g.b as usize]);
            w.push(match g.kind {
                GateKind::Xor => a ^ b,
                GateKind::And => a & b,
                GateKind::Not => !a,
            });
        }
        Ok(self.outputs.iter().map(|o| w[o.wire as usize]).collect())
    }

    /// Plain evaluation split into what each party is entitled to see.
    pub fn evaluate_split(&self, garbler: &[bool], evaluator: &[bool]) -> Result<(Vec<bool>, Vec<bool>)> {
        let all = self.evaluate(garbler, evaluator)?;
        let client = self.outputs.iter().zip(&all).filter(|(o, _)| o.to.client_sees()).map(|(_, &b)| b).collect();
        let cloud = self.outputs.iter().zip(&all).filter(|(o, _)| o.to.cloud_sees()).map(|(_, &b)| b).collect();
        Ok((client, cloud))
    }

    /// Shape digest; two parties holding equal digests hold the same circuit.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(LIBRARY_VERSION.to_le_bytes());
        h.update(self.wires.to_le_bytes());
        h.update(self.garbler_inputs.to_le_bytes());
        h.update(self.evaluator_inputs.to_le_bytes());
        h.update((self.gates.len() as u64).to_le_bytes());
        let mut buf = Vec::with_capacity(self.gates.len() * 9);
        for g in &self.gates {
            buf.push(g.kind as u8);
            buf.extend_from_slice(&g.a.to_le_bytes());
            buf.extend_from_slice(&g.b.to_le_bytes());
        }
        h.update(&buf);
        for o in &self.outputs {
            h.update(o.wire.to_le_bytes());
            h.update([o.to as u8]);
        }
        h.finalize().into()
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(MpcError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

/// Little-endian bits of a value.
pub fn to_bits(value: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| (value >> i) & 1 == 1).collect()
}

pub fn from_bits(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as u64) << i)
}

pub fn lanes_to_bits(lanes: &[u16]) -> Vec<bool> {
    lanes.iter().flat_map(|&l| to_bits(l as u64, 16)).collect()
}

pub fn bits_to_lanes(bits: &[bool]) -> Vec<u16> {
    bits.chunks(16).map(|c| from_bits(c) as u16).collect()
}

/// Bits of a byte string, most significant bit of each byte first.
pub fn bytes_to_bits_msb(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|&b| (0..8).map(move |i| (b >> (7 - i)) & 1 == 1)).collect()
}

pub fn bits_to_bytes_msb(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b as u8) << (7 - i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and_circuit() -> Circuit {
        Circuit {
            wires: 4,
            garbler_inputs: 1,
            evaluator_inputs: 1,
            gates: vec![Gate { kind: GateKind::And, a: 1, b: 2, out: 3 }],
            outputs: vec![Output { wire: 3, to: Disclosure::ToBoth }],
        }
    }

    #[test]
    fn truth_table() {
        let c = and_circuit();
        c.validate().unwrap();
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            assert_eq!(c.evaluate(&[a], &[b]).unwrap(), vec![a & b]);
        }
    }

    #[test]
    fn validation_rejects_bad_order() {
        let mut c = and_circuit();
        c.gates[0].a = 3;
        assert!(c.validate().is_err());
        let mut c = and_circuit();
        c.gates[0].out = 2;
        assert!(c.validate().is_err());
        let mut c = and_circuit();
        c.outputs[0].wire = 9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn bit_helpers() {
        assert_eq!(from_bits(&to_bits(0xbeef, 16)), 0xbeef);
        assert_eq!(bits_to_lanes(&lanes_to_bits(&[1, 0xffff, 7])), vec![1, 0xffff, 7]);
        assert_eq!(bits_to_bytes_msb(&bytes_to_bits_msb(&[0x80, 0x01])), vec![0x80, 0x01]);
        assert!(bytes_to_bits_msb(&[0x80])[0]);
    }
}
