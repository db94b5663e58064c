//! Garbled-circuit runs over a [`Link`]. One session performs the base OTs
//! once; every circuit run afterwards costs one OT extension batch.
//!
//! Message order of a run:
//!
//! 1. cloud: `GcHeader` (circuit digest, run counter)
//! 2. client: `OtExtMatrix`
//! 3. cloud: `OtExtPayload`, `GcGarblerLabels`, `GcTables` (one frame per
//!    [`TABLES_PER_FRAME`] AND gates), `GcDecode`
//! 4. client: `GcOutputColors`, only if the circuit has cloud-visible outputs

use prs_wire::{Link, MsgType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::block::{blocks_to_bytes, bytes_to_blocks, Block};
use crate::circuit::Circuit;
use crate::error::{MpcError, Result};
use crate::garble::{cloud_colors, decode_client, evaluate, garble, GarbledCircuit, Table};
use crate::ot::{BaseSender, ExtReceiver, ExtSender};

pub const TABLES_PER_FRAME: usize = 1 << 16;

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b as u8) << (i % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<bool>> {
    if bytes.len() != n.div_ceil(8) {
        return Err(MpcError::Malformed(format!("{} bytes for {n} bits", bytes.len())));
    }
    Ok((0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1 == 1).collect())
}

fn header(c: &Circuit, run: u64) -> Vec<u8> {
    let mut h = c.digest().to_vec();
    h.extend_from_slice(&run.to_le_bytes());
    h
}

/// Bytes a run of `c` puts on the wire, frame headers included.
pub fn run_bytes(c: &Circuit) -> usize {
    let frame = prs_wire::HEADER_LEN;
    let m = c.evaluator_inputs as usize;
    let ands = c.and_count();
    let table_frames = ands.div_ceil(TABLES_PER_FRAME).max(1);
    let client_out = c.outputs.iter().filter(|o| o.to.client_sees()).count();
    let cloud_out = c.outputs.iter().filter(|o| o.to.cloud_sees()).count();
    let mut total = frame + 40;
    total += frame + 128 * m.div_ceil(128) * 16;
    total += frame + 32 * m;
    total += frame + 16 * (1 + c.garbler_inputs as usize);
    total += table_frames * frame + 32 * ands;
    total += frame + client_out.div_ceil(8);
    if cloud_out > 0 {
        total += frame + cloud_out.div_ceil(8);
    }
    total
}

/// The cloud's side.
pub struct GarblerSession {
    ot: ExtSender,
    rng: ChaCha20Rng,
    runs: u64,
}

impl GarblerSession {
    pub fn setup<L: Link + ?Sized>(link: &mut L, seed: [u8; 32]) -> Result<Self> {
        let mut rng = ChaCha20Rng::from_seed(seed);
        let setup = link.recv(MsgType::OtBaseSetup)?;
        let (ot, reply) = ExtSender::from_base(&setup, &mut rng)?;
        link.send(MsgType::OtBaseReply, reply)?;
        Ok(Self { ot, rng, runs: 0 })
    }

    /// Garbles and sends `c`; returns the cloud-visible outputs.
    pub fn run<L: Link + ?Sized>(&mut self, link: &mut L, c: &Circuit, inputs: &[bool]) -> Result<Vec<bool>> {
        let run = self.runs;
        self.runs += 1;
        link.send(MsgType::GcHeader, header(c, run))?;
        let g = garble(c, self.rng.gen(), run);
        let matrix = link.recv(MsgType::OtExtMatrix)?;
        link.send(MsgType::OtExtPayload, self.ot.send(&matrix, &g.evaluator_pairs(c))?)?;
        let mut labels = vec![g.zero_label()];
        labels.extend(g.garbler_labels(c, inputs)?);
        link.send(MsgType::GcGarblerLabels, blocks_to_bytes(&labels))?;
        if g.tables.is_empty() {
            link.send(MsgType::GcTables, Vec::new())?;
        }
        for chunk in g.tables.chunks(TABLES_PER_FRAME) {
            let mut bytes = Vec::with_capacity(32 * chunk.len());
            for t in chunk {
                bytes.extend_from_slice(&t[0].to_bytes());
                bytes.extend_from_slice(&t[1].to_bytes());
            }
            link.send(MsgType::GcTables, bytes)?;
        }
        link.send(MsgType::GcDecode, pack_bits(&g.client_decode(c)))?;
        let cloud_out = c.outputs.iter().filter(|o| o.to.cloud_sees()).count();
        if cloud_out == 0 {
            return Ok(Vec::new());
        }
        let colors = unpack_bits(&link.recv(MsgType::GcOutputColors)?, cloud_out)?;
        g.decode_cloud(c, &colors)
    }
}

/// The client's side.
pub struct EvaluatorSession {
    ot: ExtReceiver,
    runs: u64,
}

impl EvaluatorSession {
    pub fn setup<L: Link + ?Sized>(link: &mut L, seed: [u8; 32]) -> Result<Self> {
        let mut rng = ChaCha20Rng::from_seed(seed);
        let (sender, msg) = BaseSender::new(&mut rng);
        link.send(MsgType::OtBaseSetup, msg)?;
        let reply = link.recv(MsgType::OtBaseReply)?;
        Ok(Self { ot: ExtReceiver::from_base(&sender, &reply)?, runs: 0 })
    }

    /// Evaluates `c` on the client's inputs; returns the client-visible outputs.
    pub fn run<L: Link + ?Sized>(&mut self, link: &mut L, c: &Circuit, inputs: &[bool]) -> Result<Vec<bool>> {
        let run = self.runs;
        self.runs += 1;
        if link.recv(MsgType::GcHeader)? != header(c, run) {
            return Err(MpcError::CircuitMismatch);
        }
        if inputs.len() != c.evaluator_inputs as usize {
            return Err(MpcError::LengthMismatch { what: "evaluator inputs", expected: c.evaluator_inputs as usize, got: inputs.len() });
        }
        let (matrix, pending) = self.ot.request(inputs);
        link.send(MsgType::OtExtMatrix, matrix)?;
        let labels = self.ot.receive(pending, &link.recv(MsgType::OtExtPayload)?)?;
        let given = bytes_to_blocks(&link.recv(MsgType::GcGarblerLabels)?)
            .filter(|b| b.len() == 1 + c.garbler_inputs as usize)
            .ok_or_else(|| MpcError::Malformed("garbler labels".into()))?;
        let ands = c.and_count();
        let mut tables: Vec<Table> = Vec::with_capacity(ands);
        for _ in 0..ands.div_ceil(TABLES_PER_FRAME).max(1) {
            let bytes = link.recv(MsgType::GcTables)?;
            let blocks = bytes_to_blocks(&bytes).ok_or_else(|| MpcError::Malformed("garbled table frame".into()))?;
            if blocks.len() % 2 != 0 {
                return Err(MpcError::Malformed("odd garbled table frame".into()));
            }
            tables.extend(blocks.chunks_exact(2).map(|p| [p[0], p[1]]));
        }
        let client_out = c.outputs.iter().filter(|o| o.to.client_sees()).count();
        let decode = unpack_bits(&link.recv(MsgType::GcDecode)?, client_out)?;
        let gc = GarbledCircuit { tables, zero_label: given[0], garbler_labels: given[1..].to_vec(), client_decode: decode };
        let out: Vec<Block> = evaluate(c, &gc, &labels, run)?;
        let colors = cloud_colors(c, &out);
        if !colors.is_empty() {
            link.send(MsgType::GcOutputColors, pack_bits(&colors))?;
        }
        decode_client(c, &out, &gc.client_decode)
    }
}
