use prs_wire::{Channel, Link, Metered};

use crate::error::Result;

/// Protocol phases in wire order. Every session starts with [`Phase::Hello`]
/// and only moves forward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u16)]
pub enum Phase {
    Hello = 1,
    Setup = 2,
    Handshake = 3,
    Unmask = 4,
    He = 5,
    GcStash = 6,
    GcCluster = 7,
    Pir = 8,
    HeMembers = 9,
    GcMembers = 10,
    Merge = 11,
    Feedback = 12,
}

impl Phase {
    pub const ALL: [Phase; 12] = [
        Phase::Hello,
        Phase::Setup,
        Phase::Handshake,
        Phase::Unmask,
        Phase::He,
        Phase::GcStash,
        Phase::GcCluster,
        Phase::Pir,
        Phase::HeMembers,
        Phase::GcMembers,
        Phase::Merge,
        Phase::Feedback,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Hello => "hello",
            Phase::Setup => "setup",
            Phase::Handshake => "handshake",
            Phase::Unmask => "unmask",
            Phase::He => "he",
            Phase::GcStash => "gc-stash",
            Phase::GcCluster => "gc-cluster",
            Phase::Pir => "pir",
            Phase::HeMembers => "he-members",
            Phase::GcMembers => "gc-members",
            Phase::Merge => "merge",
            Phase::Feedback => "feedback",
        }
    }
}

/// A [`Link`] that also tracks protocol phases.
pub trait Session: Link {
    fn enter(&mut self, phase: Phase) -> Result<()>;
    fn abort(&mut self, reason: &str);
}

impl<C: Channel> Session for Metered<C> {
    fn enter(&mut self, phase: Phase) -> Result<()> {
        Ok(Metered::enter(self, phase.code())?)
    }

    fn abort(&mut self, reason: &str) {
        Metered::abort(self, reason)
    }
}
