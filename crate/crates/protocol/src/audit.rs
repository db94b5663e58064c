//! State inspection hooks for the threat-model audits.
//!
//! Each role reports the secret-dependent buffers it holds at every phase
//! boundary. The checks then search those buffers for values the role must
//! never hold: plaintext model records for the cloud, cloud shares for the
//! client.

use std::collections::{HashMap, HashSet};

use prs_core::PreparedSets;
use prs_wire::MsgType;

use crate::error::{ProtocolError, Result};
use crate::phase::Phase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    DataOwner,
    Cloud,
    Client,
}

/// Prefix of buffers holding public metadata, which the audits skip.
pub const PUBLIC_PREFIX: &str = "public/";

/// Named byte buffers held by one role at one instant.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateView {
    pub buffers: Vec<(String, Vec<u8>)>,
}

impl StateView {
    pub fn lanes(&mut self, name: impl Into<String>, lanes: &[u16]) -> &mut Self {
        self.buffers.push((name.into(), lanes.iter().flat_map(|l| l.to_le_bytes()).collect()));
        self
    }

    pub fn bytes(&mut self, name: impl Into<String>, bytes: &[u8]) -> &mut Self {
        self.buffers.push((name.into(), bytes.to_vec()));
        self
    }
}

pub trait Observer {
    /// Whether views are wanted at all; building them costs copies.
    fn enabled(&self) -> bool {
        true
    }

    fn checkpoint(&mut self, phase: Phase, view: StateView);
}

/// Discards everything.
pub struct NoAudit;

impl Observer for NoAudit {
    fn enabled(&self) -> bool {
        false
    }

    fn checkpoint(&mut self, _: Phase, _: StateView) {}
}

/// Keeps every checkpoint.
#[derive(Clone, Debug, Default)]
pub struct StateLog {
    pub checkpoints: Vec<(Phase, StateView)>,
}

impl Observer for StateLog {
    fn checkpoint(&mut self, phase: Phase, view: StateView) {
        self.checkpoints.push((phase, view));
    }
}

impl StateLog {
    pub fn phases(&self) -> Vec<Phase> {
        self.checkpoints.iter().map(|(p, _)| *p).collect()
    }
}

fn even_windows(bytes: &[u8], len: usize) -> impl Iterator<Item = (usize, &[u8])> {
    (0..bytes.len().saturating_sub(len - 1)).step_by(2).map(move |o| (o, &bytes[o..o + len]))
}

/// Byte patterns of every real record and centroid, cut to at most 8 bytes.
fn plaintext_patterns(sets: &PreparedSets) -> HashMap<usize, HashSet<Vec<u8>>> {
    let mut out: HashMap<usize, HashSet<Vec<u8>>> = HashMap::new();
    let mut add = |lanes: Vec<u16>| {
        let bytes: Vec<u8> = lanes.iter().flat_map(|l| l.to_le_bytes()).take(8).collect();
        out.entry(bytes.len()).or_default().insert(bytes);
    };
    for c in &sets.clusters {
        add(c.centroid.clone());
        for m in c.real_members() {
            add([&[m.item_lane()][..], &m.coords].concat());
        }
    }
    for m in sets.stash.iter().filter(|m| !m.is_pad()) {
        add([&[m.item_lane()][..], &m.coords].concat());
    }
    out
}

/// Fails if any cloud buffer contains a plaintext record or centroid.
pub fn audit_cloud(log: &StateLog, sets: &PreparedSets) -> Result<()> {
    let patterns = plaintext_patterns(sets);
    for (phase, view) in &log.checkpoints {
        for (name, buf) in view.buffers.iter().filter(|(n, _)| !n.starts_with(PUBLIC_PREFIX)) {
            for (&len, set) in &patterns {
                if let Some((offset, _)) = even_windows(buf, len).find(|(_, w)| set.contains(*w)) {
                    return Err(ProtocolError::Audit(format!(
                        "cloud buffer {name:?} holds a plaintext record at byte {offset} after {}",
                        phase.name()
                    )));
                }
            }
        }
    }
    Ok(())
}

const SHARE_WINDOW: usize = 16;

/// Fails if any client buffer contains a 16-byte window of a cloud share
/// buffer. A window found in the client's buffer of the same name and at
/// the same offset is allowed: there the two shares coincide because the
/// shared values are zero, which the client's own share already implies.
pub fn audit_client(client: &StateLog, cloud: &StateLog) -> Result<()> {
    let mut windows: HashMap<&[u8], Vec<(&str, usize)>> = HashMap::new();
    for (_, view) in &cloud.checkpoints {
        for (name, buf) in &view.buffers {
            for (o, w) in even_windows(buf, SHARE_WINDOW) {
                windows.entry(w).or_default().push((name, o));
            }
        }
    }
    for (phase, view) in &client.checkpoints {
        for (name, buf) in &view.buffers {
            for (o, w) in even_windows(buf, SHARE_WINDOW) {
                if let Some(hits) = windows.get(w) {
                    if hits.iter().any(|&(n, off)| n != name || off != o) {
                        return Err(ProtocolError::Audit(format!(
                            "client buffer {name:?} holds cloud share bytes at {o} after {}",
                            phase.name()
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Frame types a client may receive from the cloud. None of them carries
/// a cloud share in the clear: GC frames carry labels and tables, HE
/// results are encrypted under the client's key.
pub const CLIENT_RECEIVABLE: [MsgType; 8] = [
    MsgType::Ack,
    MsgType::HeResult,
    MsgType::GcHeader,
    MsgType::GcGarblerLabels,
    MsgType::GcTables,
    MsgType::GcDecode,
    MsgType::OtBaseReply,
    MsgType::OtExtPayload,
];

pub fn audit_client_transcript(received: &[MsgType]) -> Result<()> {
    match received.iter().find(|k| !CLIENT_RECEIVABLE.contains(k)) {
        Some(k) => Err(ProtocolError::Audit(format!("client received a {k:?} frame"))),
        None => Ok(()),
    }
}
