//! Half-gates garbling with free XOR and point-and-permute: two ciphertexts
//! per AND gate, none for XOR or NOT.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::block::{Block, FixedKeyHash};
use crate::circuit::{check_len, Circuit, GateKind};
use crate::error::Result;

pub type Table = [Block; 2];

/// Garbler-side result of garbling. The offset `delta` never leaves it.
pub struct Garbling {
    delta: Block,
    zero: Vec<Block>,
    pub tables: Vec<Table>,
    tweak: u64,
}

/// What the evaluator receives besides its OT labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub tables: Vec<Table>,
    pub zero_label: Block,
    pub garbler_labels: Vec<Block>,
    /// Decode bits for client-visible outputs, in output order.
    pub client_decode: Vec<bool>,
}

#[inline]
fn tweaks(base: u64, gate: usize) -> (u128, u128) {
    let t = ((base as u128) << 64) | (2 * gate as u128);
    (t, t | 1)
}

/// Garbles `c`. `tweak` separates hash inputs between circuits garbled in
/// one session.
pub fn garble(c: &Circuit, seed: [u8; 32], tweak: u64) -> Garbling {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let hash = FixedKeyHash::default();
    let delta = Block(Block::random(&mut rng).0 | 1);
    let inputs = 1 + (c.garbler_inputs + c.evaluator_inputs) as usize;
    let mut zero = Vec::with_capacity(c.wires as usize);
    for _ in 0..inputs {
        zero.push(Block::random(&mut rng));
    }
    let mut tables = Vec::with_capacity(c.and_count());
    let mut h = [Block::ZERO; 4];
    for g in &c.gates {
        let w = match g.kind {
            GateKind::Xor => zero[g.a as usize] ^ zero[g.b as usize],
            GateKind::Not => zero[g.a as usize] ^ delta,
            GateKind::And => {
                let a0 = zero[g.a as usize];
                let b0 = zero[g.b as usize];
                let (pa, pb) = (a0.lsb(), b0.lsb());
                let (t0, t1) = tweaks(tweak, tables.len());
                hash.hash_many(&[a0, a0 ^ delta, b0, b0 ^ delta], &[t0, t0, t1, t1], &mut h);
                let tg = h[0] ^ h[1] ^ delta.select(pb);
                let wg = h[0] ^ tg.select(pa);
                let te = h[2] ^ h[3] ^ a0;
                let we = h[2] ^ (te ^ a0).select(pb);
                tables.push([tg, te]);
                wg ^ we
            }
        };
        zero.push(w);
    }
    Garbling { delta, zero, tables, tweak }
}

impl Garbling {
    fn label(&self, wire: u32, bit: bool) -> Block {
        self.zero[wire as usize] ^ self.delta.select(bit)
    }

    /// Label pairs for the evaluator's inputs, to be sent through OT.
    pub fn evaluator_pairs(&self, c: &Circuit) -> Vec<(Block, Block)> {
        (0..c.evaluator_inputs as usize)
            .map(|i| {
                let w = c.evaluator_input_wire(i);
                (self.label(w, false), self.label(w, true))
            })
            .collect()
    }

    /// Active labels for the garbler's own inputs.
    pub fn garbler_labels(&self, c: &Circuit, garbler_inputs: &[bool]) -> Result<Vec<Block>> {
        check_len("garbler inputs", c.garbler_inputs as usize, garbler_inputs.len())?;
        Ok(garbler_inputs.iter().enumerate().map(|(i, &b)| self.label(c.garbler_input_wire(i), b)).collect())
    }

    pub fn zero_label(&self) -> Block {
        self.zero[0]
    }

    /// Decode bits for client-visible outputs.
    pub fn client_decode(&self, c: &Circuit) -> Vec<bool> {
        c.outputs.iter().filter(|o| o.to.client_sees()).map(|o| self.zero[o.wire as usize].lsb()).collect()
    }

    /// Everything the evaluator needs except its own input labels.
    pub fn for_evaluator(&self, c: &Circuit, garbler_inputs: &[bool]) -> Result<GarbledCircuit> {
        Ok(GarbledCircuit {
            tables: self.tables.clone(),
            zero_label: self.zero_label(),
            garbler_labels: self.garbler_labels(c, garbler_inputs)?,
            client_decode: self.client_decode(c),
        })
    }

    /// Decodes cloud-visible outputs from the colour bits the evaluator returns.
    pub fn decode_cloud(&self, c: &Circuit, colors: &[bool]) -> Result<Vec<bool>> {
        let wires: Vec<u32> = c.outputs.iter().filter(|o| o.to.cloud_sees()).map(|o| o.wire).collect();
        check_len("output colours", wires.len(), colors.len())?;
        Ok(wires.iter().zip(colors).map(|(&w, &col)| col ^ self.zero[w as usize].lsb()).collect())
    }

    pub fn tweak(&self) -> u64 {
        self.tweak
    }
}

/// Evaluates a garbled circuit and returns one active label per output.
pub fn evaluate(c: &Circuit, gc: &GarbledCircuit, evaluator_labels: &[Block], tweak: u64) -> Result<Vec<Block>> {
    check_len("garbler labels", c.garbler_inputs as usize, gc.garbler_labels.len())?;
    check_len("evaluator labels", c.evaluator_inputs as usize, evaluator_labels.len())?;
    check_len("garbled tables", c.and_count(), gc.tables.len())?;
    let hash = FixedKeyHash::default();
    let mut w = Vec::with_capacity(c.wires as usize);
    w.push(gc.zero_label);
    w.extend_from_slice(&gc.garbler_labels);
    w.extend_from_slice(evaluator_labels);
    let mut next_table = 0;
    let mut h = [Block::ZERO; 2];
    for g in &c.gates {
        let out = match g.kind {
            GateKind::Xor => w[g.a as usize] ^ w[g.b as usize],
            GateKind::Not => w[g.a as usize],
            GateKind::And => {
                let a = w[g.a as usize];
                let b = w[g.b as usize];
                let [tg, te] = gc.tables[next_table];
                let (t0, t1) = tweaks(tweak, next_table);
                next_table += 1;
                hash.hash_many(&[a, b], &[t0, t1], &mut h);
                let wg = h[0] ^ tg.select(a.lsb());
                let we = h[1] ^ (te ^ a).select(b.lsb());
                wg ^ we
            }
        };
        w.push(out);
    }
    Ok(c.outputs.iter().map(|o| w[o.wire as usize]).collect())
}

/// Client-visible output bits.
pub fn decode_client(c: &Circuit, labels: &[Block], decode: &[bool]) -> Result<Vec<bool>> {
    check_len("output labels", c.outputs.len(), labels.len())?;
    let visible: Vec<Block> = c.outputs.iter().zip(labels).filter(|(o, _)| o.to.client_sees()).map(|(_, &l)| l).collect();
    check_len("decode bits", visible.len(), decode.len())?;
    Ok(visible.iter().zip(decode).map(|(l, &d)| l.lsb() ^ d).collect())
}

/// Colour bits of cloud-visible outputs, which reveal nothing to the client.
pub fn cloud_colors(c: &Circuit, labels: &[Block]) -> Vec<bool> {
    c.outputs.iter().zip(labels).filter(|(o, _)| o.to.cloud_sees()).map(|(_, l)| l.lsb()).collect()
}
