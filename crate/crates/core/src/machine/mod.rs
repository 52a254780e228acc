//! Executable abstract state machine for the commit protocol.
//!
//! A [`MachineState`] is a multiset of [`SubState`]s for points, channels and
//! synchronizers together with the [`SyncTable`] that maps every synchronizer to
//! the actions bound to its points. [`machine_step`] applies the transition rules
//! (I)–(IV.ii); [`explore`] builds the reachable graph modulo renaming of point and
//! synchronizer ids; [`verify_theorem`] checks that a source program and its
//! compiled state are related by the correspondence/safety/progress relation.
//!
//! Name restriction is modelled by global freshness: ids come from per-state
//! counters, and [`canonicalize`] recovers alpha-equivalence.

mod bisim;
mod canon;
mod compile;
mod explore;
mod invariants;
mod program;
mod rules;

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap;
use std::fmt;

use thiserror::Error;

use crate::progdsl::{Action, ChannelId};

pub use bisim::{verify_on_graph, verify_theorem, BisimReport, ClauseVerdict};
pub use canon::{canonicalize, collect_junk, rename};
pub use compile::{compile, denote_program, denote_state};
pub use explore::{explore, liveness_counterexamples, state_hash, ReachGraph};
pub use invariants::{check_invariants, Violation};
pub use program::{canonical_program, program_graph, program_step, ProgramGraph};
pub use rules::machine_step;

/// Point identifier (fresh per generation).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PointId(pub u32);

/// Synchronizer identifier (fresh per generation).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SyncId(pub u32);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for SyncId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Sub-state of a single principal.
///
/// Variant order is significant: it fixes the canonical sort order of states.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum SubState {
    /// `p ↦ α`: unmatched point.
    PointBound(PointId, Action),
    /// `Candidate_p`: matched, waiting for its synchronizer.
    Candidate(PointId),
    /// `α`: released action.
    Released(Action),
    /// `⊙_c`: free channel.
    ChanFree(ChannelId),
    /// `Match_c(p, q)`: busy channel; `p` inputs, `q` outputs.
    ChanMatch(ChannelId, PointId, PointId),
    /// `□_s`: open synchronizer.
    SyncOpen(SyncId),
    /// `⊠_s`: closed synchronizer.
    SyncClosed(SyncId),
    /// `Select_s(p)`: approved by `s`.
    Selected(SyncId, PointId),
    /// `Reject(p)`: refused.
    Rejected(PointId),
    /// `Done_s(p)`: confirmed.
    Done(SyncId, PointId),
    /// `Retry_s`: cancelled.
    Retry(SyncId),
}

impl fmt::Display for SubState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SubState::*;
        match self {
            PointBound(p, a) => write!(f, "{p}->{a}"),
            Candidate(p) => write!(f, "Candidate({p})"),
            Released(a) => write!(f, "{a}"),
            ChanFree(c) => write!(f, "Free({c})"),
            ChanMatch(c, p, q) => write!(f, "Match_{c}({p},{q})"),
            SyncOpen(s) => write!(f, "Open({s})"),
            SyncClosed(s) => write!(f, "Closed({s})"),
            Selected(s, p) => write!(f, "Select_{s}({p})"),
            Rejected(p) => write!(f, "Reject({p})"),
            Done(s, p) => write!(f, "Done_{s}({p})"),
            Retry(s) => write!(f, "Retry({s})"),
        }
    }
}

/// Synchronizer domains: each synchronizer maps its points to actions.
pub type SyncTable = BTreeMap<SyncId, BTreeMap<PointId, Action>>;

/// Global machine state.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct MachineState {
    /// Multiset of sub-states, kept sorted.
    pub subs: Vec<SubState>,
    pub syncs: SyncTable,
    pub channels: BTreeSet<ChannelId>,
    pub next_point: u32,
    pub next_sync: u32,
}

impl MachineState {
    pub fn fresh_point(&mut self) -> PointId {
        let p = PointId(self.next_point);
        self.next_point += 1;
        p
    }

    pub fn fresh_sync(&mut self) -> SyncId {
        let s = SyncId(self.next_sync);
        self.next_sync += 1;
        s
    }

    pub fn normalize(&mut self) {
        self.subs.sort_unstable();
    }

    pub fn contains(&self, sub: &SubState) -> bool {
        self.subs.binary_search(sub).is_ok()
    }

    /// Owning synchronizer of every point in some domain.
    pub fn owners(&self) -> FxHashMap<PointId, SyncId> {
        let mut owners = FxHashMap::default();
        for (&s, dom) in &self.syncs {
            for &p in dom.keys() {
                owners.insert(p, s);
            }
        }
        owners
    }

    /// The action bound to `p` by whichever synchronizer owns it.
    pub fn action_of(&self, p: PointId) -> Option<&Action> {
        self.syncs.values().find_map(|dom| dom.get(&p))
    }
}

impl fmt::Display for MachineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{ ")?;
        for (i, sub) in self.subs.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{sub}")?;
        }
        f.write_str(" }")?;
        if !self.syncs.is_empty() {
            f.write_str(" where ")?;
            for (i, (s, dom)) in self.syncs.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{s}={{")?;
                for (j, (p, a)) in dom.iter().enumerate() {
                    if j > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}:{a}")?;
                }
                f.write_str("}")?;
            }
        }
        Ok(())
    }
}

/// Multiset of released actions.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Denotation(Vec<Action>);

impl Denotation {
    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<Action> for Denotation {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut v: Vec<Action> = iter.into_iter().collect();
        v.sort_unstable();
        Denotation(v)
    }
}

impl fmt::Display for Denotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// Name of the rule that produced a transition.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum RuleLabel {
    I,
    IIi,
    IIii,
    IIIi,
    IIIii,
    IIIiii,
    IIIiv,
    IVi,
    IVii,
    /// Source-program reduction.
    Src,
}

impl fmt::Display for RuleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleLabel::I => "I",
            RuleLabel::IIi => "II.i",
            RuleLabel::IIii => "II.ii",
            RuleLabel::IIIi => "III.i",
            RuleLabel::IIIii => "III.ii",
            RuleLabel::IIIiii => "III.iii",
            RuleLabel::IIIiv => "III.iv",
            RuleLabel::IVi => "IV.i",
            RuleLabel::IVii => "IV.ii",
            RuleLabel::Src => "SRC",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("malformed state: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invariant(Vec<Violation>),
    #[error("state bound of {limit} exceeded")]
    BoundExceeded {
        limit: usize,
        partial: Box<ReachGraph>,
    },
}
