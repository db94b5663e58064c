use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::channel::{Channel, Counters};
use crate::error::{Result, WireError};
use crate::frame::{Frame, MsgType};

/// Typed message exchange within the current phase.
pub trait Link {
    fn send(&mut self, kind: MsgType, payload: Vec<u8>) -> Result<()>;
    /// Receives the next frame, which must be of type `kind`.
    fn recv(&mut self, kind: MsgType) -> Result<Vec<u8>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub direction: Direction,
    pub kind: MsgType,
    pub phase: u16,
    /// Frame size on the wire, header included.
    pub bytes: usize,
    /// Offset from the start of the session.
    pub at: Duration,
}

/// Ordered log of one endpoint's frames with a running digest over their
/// exact bytes. Timestamps are kept out of the digest.
#[derive(Clone)]
pub struct Transcript {
    entries: Vec<Entry>,
    hasher: Sha256,
}

impl Default for Transcript {
    fn default() -> Self {
        Self { entries: Vec::new(), hasher: Sha256::new() }
    }
}

impl Transcript {
    fn record(&mut self, direction: Direction, frame: &Frame, at: Duration) {
        self.hasher.update([direction as u8]);
        self.hasher.update(frame.encode());
        self.entries.push(Entry { direction, kind: frame.kind, phase: frame.phase, bytes: frame.wire_len(), at });
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn digest(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }

    pub fn bytes(&self, direction: Direction) -> u64 {
        self.entries.iter().filter(|e| e.direction == direction).map(|e| e.bytes as u64).sum()
    }

    pub fn kinds_received(&self) -> Vec<MsgType> {
        self.entries.iter().filter(|e| e.direction == Direction::Received).map(|e| e.kind).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhaseReport {
    pub sent: u64,
    pub received: u64,
    pub frames: usize,
    pub wall: Duration,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MeterReport {
    pub phases: BTreeMap<u16, PhaseReport>,
    pub sent: u64,
    pub received: u64,
    pub peak_rss_kb: Option<u64>,
}

impl MeterReport {
    pub fn total(&self) -> u64 {
        self.sent + self.received
    }
}

/// Peak resident set size of this process, from `VmHWM`.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// A channel endpoint that stamps outgoing frames with the current phase,
/// rejects frames from any other phase and records everything.
pub struct Metered<C> {
    inner: C,
    phase: Option<u16>,
    start: Instant,
    phase_start: Instant,
    walls: BTreeMap<u16, Duration>,
    transcript: Transcript,
}

impl<C: Channel> Metered<C> {
    pub fn new(inner: C) -> Self {
        let now = Instant::now();
        Self { inner, phase: None, start: now, phase_start: now, walls: BTreeMap::new(), transcript: Transcript::default() }
    }

    pub fn phase(&self) -> Option<u16> {
        self.phase
    }

    /// Moves to `phase`, which must be later than the current one.
    pub fn enter(&mut self, phase: u16) -> Result<()> {
        if let Some(current) = self.phase {
            if phase <= current {
                return Err(WireError::PhaseOrder { current, next: phase });
            }
        }
        self.close_phase();
        self.phase = Some(phase);
        Ok(())
    }

    fn close_phase(&mut self) {
        let now = Instant::now();
        if let Some(p) = self.phase {
            *self.walls.entry(p).or_default() += now - self.phase_start;
        }
        self.phase_start = now;
    }

    /// Sends an abort frame; errors are ignored since the session is over.
    pub fn abort(&mut self, reason: &str) {
        let frame = Frame::new(MsgType::Abort, self.phase.unwrap_or(0), reason.as_bytes().to_vec());
        let _ = self.inner.send_frame(&frame);
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn counters(&self) -> Counters {
        self.inner.counters()
    }

    pub fn into_inner(self) -> C {
        self.inner
    }

    pub fn report(&mut self) -> MeterReport {
        self.close_phase();
        let mut phases: BTreeMap<u16, PhaseReport> = BTreeMap::new();
        for (&p, &wall) in &self.walls {
            phases.entry(p).or_default().wall = wall;
        }
        for e in self.transcript.entries() {
            let r = phases.entry(e.phase).or_default();
            r.frames += 1;
            match e.direction {
                Direction::Sent => r.sent += e.bytes as u64,
                Direction::Received => r.received += e.bytes as u64,
            }
        }
        MeterReport {
            sent: self.transcript.bytes(Direction::Sent),
            received: self.transcript.bytes(Direction::Received),
            phases,
            peak_rss_kb: peak_rss_kb(),
        }
    }
}

impl<C: Channel> Link for Metered<C> {
    fn send(&mut self, kind: MsgType, payload: Vec<u8>) -> Result<()> {
        let frame = Frame::new(kind, self.phase.unwrap_or(0), payload);
        self.inner.send_frame(&frame)?;
        self.transcript.record(Direction::Sent, &frame, self.start.elapsed());
        Ok(())
    }

    fn recv(&mut self, kind: MsgType) -> Result<Vec<u8>> {
        let frame = self.inner.recv_frame()?;
        self.transcript.record(Direction::Received, &frame, self.start.elapsed());
        let phase = self.phase.unwrap_or(0);
        if frame.kind == MsgType::Abort {
            return Err(WireError::Aborted(String::from_utf8_lossy(&frame.payload).into_owned()));
        }
        if frame.kind != kind || frame.phase != phase {
            return Err(WireError::Desync { expected: kind, phase, got: frame.kind, got_phase: frame.phase });
        }
        Ok(frame.payload)
    }
}
