//! Well-formedness conditions every reachable state satisfies.
//!
//! 1. every referenced point has exactly one owning synchronizer, is in at most
//!    one point phase (`p ↦ α`, `Candidate_p`, `Select_s(p)`, `Reject(p)`,
//!    `Done_s(p)`), and every synchronizer is exactly one of open or closed;
//! 2. every channel is exactly one of free or busy;
//! 3. selections, rejections, confirmations and cancellations only exist under a
//!    closed synchronizer, which holds at most one of them besides rejections;
//! 4. `Match_c(p, q)` is present iff `p` inputs on `c`, `q` outputs on `c` and
//!    both are candidates, selected or rejected.

use rustc_hash::FxHashMap as HashMap;
use std::fmt;

use super::{MachineState, PointId, SubState, SyncId};
use crate::progdsl::{Action, ChannelId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: u8,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "condition {}: {}", self.condition, self.detail)
    }
}

#[derive(Default)]
struct Census {
    phases: HashMap<PointId, u32>,
    active: HashMap<PointId, u32>,
    open: HashMap<SyncId, u32>,
    closed: HashMap<SyncId, u32>,
    decided: HashMap<SyncId, u32>,
    free: HashMap<ChannelId, u32>,
    busy: HashMap<ChannelId, u32>,
}

fn bump<K: std::hash::Hash + Eq>(m: &mut HashMap<K, u32>, k: K) {
    *m.entry(k).or_default() += 1;
}

/// All violations of the four conditions; empty iff the state is well formed.
pub fn check_invariants(st: &MachineState) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |condition: u8, detail: String| out.push(Violation { condition, detail });

    let mut owner: HashMap<PointId, SyncId> = HashMap::default();
    for (&s, dom) in &st.syncs {
        for (&p, a) in dom {
            if let Some(prev) = owner.insert(p, s) {
                flag(1, format!("{p} is in the domains of both {prev} and {s}"));
            }
            if !st.channels.contains(&a.channel) {
                flag(2, format!("{s} binds {p} to unknown channel {}", a.channel));
            }
        }
    }
    let action =
        |p: PointId| -> Option<&Action> { owner.get(&p).and_then(|s| st.syncs[s].get(&p)) };

    let mut census = Census::default();
    for sub in &st.subs {
        let mut points: Vec<PointId> = Vec::new();
        let mut syncs: Vec<SyncId> = Vec::new();
        match sub {
            SubState::PointBound(p, a) => {
                points.push(*p);
                bump(&mut census.phases, *p);
                if let Some(bound) = action(*p) {
                    if bound != a {
                        flag(
                            1,
                            format!("{p} bound to {a} but its synchronizer says {bound}"),
                        );
                    }
                }
            }
            SubState::Candidate(p) | SubState::Rejected(p) => {
                points.push(*p);
                bump(&mut census.phases, *p);
                bump(&mut census.active, *p);
                if let SubState::Rejected(p) = sub {
                    match owner.get(p) {
                        Some(s) if !st.contains(&SubState::SyncClosed(*s)) => {
                            flag(3, format!("Reject({p}) but {s} is not closed"))
                        }
                        _ => {}
                    }
                }
            }
            SubState::Selected(s, p) | SubState::Done(s, p) => {
                points.push(*p);
                syncs.push(*s);
                bump(&mut census.phases, *p);
                if matches!(sub, SubState::Selected(..)) {
                    bump(&mut census.active, *p);
                }
                bump(&mut census.decided, *s);
                if owner.get(p) != Some(s) {
                    flag(3, format!("{sub} names {p} outside the domain of {s}"));
                }
            }
            SubState::Retry(s) => {
                syncs.push(*s);
                bump(&mut census.decided, *s);
            }
            SubState::SyncOpen(s) => {
                syncs.push(*s);
                bump(&mut census.open, *s);
            }
            SubState::SyncClosed(s) => {
                syncs.push(*s);
                bump(&mut census.closed, *s);
            }
            SubState::ChanFree(c) => bump(&mut census.free, c.clone()),
            SubState::ChanMatch(c, p, q) => {
                points.extend([*p, *q]);
                bump(&mut census.busy, c.clone());
                if action(*p).is_none_or(|a| a.channel != *c || !a.is_input()) {
                    flag(4, format!("{sub}: {p} does not input on {c}"));
                }
                if action(*q).is_none_or(|a| a.channel != *c || a.is_input()) {
                    flag(4, format!("{sub}: {q} does not output on {c}"));
                }
            }
            SubState::Released(_) => {}
        }
        for p in points {
            if !owner.contains_key(&p) {
                flag(
                    1,
                    format!("{sub} refers to {p}, which no synchronizer owns"),
                );
            }
        }
        for s in syncs {
            if !st.syncs.contains_key(&s) {
                flag(1, format!("{sub} refers to unknown synchronizer {s}"));
            }
        }
        if let SubState::ChanFree(c) | SubState::ChanMatch(c, _, _) = sub {
            if !st.channels.contains(c) {
                flag(2, format!("{sub} refers to unknown channel {c}"));
            }
        }
    }

    // 1
    for (p, n) in &census.phases {
        if *n > 1 {
            flag(1, format!("{p} is in {n} point phases"));
        }
    }
    for s in st.syncs.keys() {
        let n =
            census.open.get(s).copied().unwrap_or(0) + census.closed.get(s).copied().unwrap_or(0);
        if n != 1 {
            flag(1, format!("{s} has {n} open/closed sub-states"));
        }
    }
    // 2
    for c in &st.channels {
        let n = census.free.get(c).copied().unwrap_or(0) + census.busy.get(c).copied().unwrap_or(0);
        if n != 1 {
            flag(2, format!("channel {c} has {n} free/busy sub-states"));
        }
    }
    // 3
    for (s, n) in &census.decided {
        if census.closed.get(s).copied().unwrap_or(0) == 0 {
            flag(
                3,
                format!("{s} has a selection, confirmation or cancellation but is not closed"),
            );
        }
        if *n > 1 {
            flag(
                3,
                format!("{s} has {n} selections/confirmations/cancellations"),
            );
        }
    }
    // 4: every pair of active complementary points must be the channel's match.
    let mut active_by_chan: HashMap<(ChannelId, bool), Vec<PointId>> = HashMap::default();
    for &p in census.active.keys() {
        if let Some(a) = action(p) {
            active_by_chan
                .entry((a.channel.clone(), a.is_input()))
                .or_default()
                .push(p);
        }
    }
    for ((c, is_input), ps) in &active_by_chan {
        if !is_input {
            continue;
        }
        let Some(qs) = active_by_chan.get(&(c.clone(), false)) else {
            continue;
        };
        for &p in ps {
            for &q in qs {
                if !st.contains(&SubState::ChanMatch(c.clone(), p, q)) {
                    flag(4, format!("{p} and {q} are active on {c} but not matched"));
                }
            }
        }
    }
    for sub in &st.subs {
        if let SubState::ChanMatch(_, p, q) = sub {
            for x in [p, q] {
                if !census.active.contains_key(x) {
                    flag(
                        4,
                        format!("{sub}: {x} is not a candidate, selected or rejected"),
                    );
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::compile;
    use crate::progdsl::parse_program;

    #[test]
    fn compiled_states_are_well_formed() {
        for text in [
            "x",
            "x | !x",
            "select(!x,!y) | select(y,z) | select(!z) | select(x)",
            "select(x,!x) | select(x,x,x)",
        ] {
            let st = compile(&parse_program(text).unwrap());
            assert_eq!(check_invariants(&st), vec![], "{text}");
        }
    }

    #[test]
    fn free_and_busy_channel_violates_condition_2() {
        let mut st = compile(&parse_program("select(x) | select(!x)").unwrap());
        let c = ChannelId::new("x").unwrap();
        st.subs.retain(|s| !matches!(s, SubState::PointBound(..)));
        st.subs.extend([
            SubState::Candidate(PointId(0)),
            SubState::Candidate(PointId(1)),
            SubState::ChanMatch(c, PointId(0), PointId(1)),
        ]);
        st.normalize();
        let v = check_invariants(&st);
        assert!(v.iter().any(|v| v.condition == 2), "{v:?}");
    }

    #[test]
    fn double_phase_violates_condition_1() {
        let mut st = compile(&parse_program("select(x)").unwrap());
        st.subs.push(SubState::Candidate(PointId(0)));
        st.normalize();
        let v = check_invariants(&st);
        assert!(v.iter().any(|v| v.condition == 1), "{v:?}");
    }

    #[test]
    fn selection_under_open_synchronizer_violates_condition_3() {
        let mut st = compile(&parse_program("select(x)").unwrap());
        st.subs.retain(|s| !matches!(s, SubState::PointBound(..)));
        st.subs.push(SubState::Retry(SyncId(0)));
        st.normalize();
        let v = check_invariants(&st);
        assert!(v.iter().any(|v| v.condition == 3), "{v:?}");
    }

    #[test]
    fn unmatched_candidates_violate_condition_4() {
        let mut st = compile(&parse_program("select(x) | select(!x)").unwrap());
        st.subs.retain(|s| !matches!(s, SubState::PointBound(..)));
        st.subs.extend([
            SubState::Candidate(PointId(0)),
            SubState::Candidate(PointId(1)),
        ]);
        st.normalize();
        let v = check_invariants(&st);
        assert!(v.iter().any(|v| v.condition == 4), "{v:?}");
    }

    #[test]
    fn unowned_point_violates_condition_1() {
        let mut st = compile(&parse_program("x").unwrap());
        st.subs
            .push(SubState::PointBound(PointId(9), Action::input("x")));
        st.normalize();
        let v = check_invariants(&st);
        assert!(v.iter().any(|v| v.condition == 1), "{v:?}");
    }
}
