//! Transition rules (I)–(IV.ii).

use std::collections::BTreeMap;

use super::{check_invariants, MachineError, MachineState, PointId, RuleLabel, SubState, SyncId};

fn replace(st: &MachineState, remove: &[usize], add: Vec<SubState>) -> MachineState {
    let mut next = st.clone();
    let mut remove = remove.to_vec();
    remove.sort_unstable_by(|a, b| b.cmp(a));
    for i in remove {
        next.subs.swap_remove(i);
    }
    next.subs.extend(add);
    next.normalize();
    next
}

enum Verdict {
    Selected(usize, SyncId),
    Rejected(usize),
}

fn verdict_of(st: &MachineState, p: PointId) -> Option<Verdict> {
    st.subs.iter().enumerate().find_map(|(i, sub)| match *sub {
        SubState::Selected(s, q) if q == p => Some(Verdict::Selected(i, s)),
        SubState::Rejected(q) if q == p => Some(Verdict::Rejected(i)),
        _ => None,
    })
}

/// Every successor reachable by one rule application at one position.
///
/// In debug builds the state is first checked against the protocol invariants
/// and a malformed state is reported as [`MachineError::Invariant`].
pub fn machine_step(st: &MachineState) -> Result<Vec<(RuleLabel, MachineState)>, MachineError> {
    if cfg!(debug_assertions) {
        let violations = check_invariants(st);
        if !violations.is_empty() {
            return Err(MachineError::Invariant(violations));
        }
    }
    let owners = st.owners();
    let find = |target: &SubState| st.subs.iter().position(|s| s == target);
    let mut out = Vec::new();

    for (i, sub) in st.subs.iter().enumerate() {
        match sub {
            // (I) p ↦ c | q ↦ c̄ | ⊙_c → Candidate_p | Candidate_q | Match_c(p, q)
            SubState::ChanFree(c) => {
                let bound = |input: bool| {
                    st.subs
                        .iter()
                        .enumerate()
                        .filter_map(move |(k, s)| match s {
                            SubState::PointBound(p, a)
                                if a.channel == *c && a.is_input() == input =>
                            {
                                Some((k, *p))
                            }
                            _ => None,
                        })
                };
                for (ki, p) in bound(true) {
                    for (ko, q) in bound(false) {
                        out.push((
                            RuleLabel::I,
                            replace(
                                st,
                                &[i, ki, ko],
                                vec![
                                    SubState::Candidate(p),
                                    SubState::Candidate(q),
                                    SubState::ChanMatch(c.clone(), p, q),
                                ],
                            ),
                        ));
                    }
                }
            }
            // (II.i) Candidate_p | □_s → ⊠_s | Select_s(p)
            // (II.ii) Candidate_p | ⊠_s → ⊠_s | Reject(p)
            SubState::Candidate(p) => {
                let Some(&s) = owners.get(p) else { continue };
                if let Some(k) = find(&SubState::SyncOpen(s)) {
                    out.push((
                        RuleLabel::IIi,
                        replace(
                            st,
                            &[i, k],
                            vec![SubState::SyncClosed(s), SubState::Selected(s, *p)],
                        ),
                    ));
                }
                if find(&SubState::SyncClosed(s)).is_some() {
                    out.push((
                        RuleLabel::IIii,
                        replace(st, &[i], vec![SubState::Rejected(*p)]),
                    ));
                }
            }
            // (III.i–iv) resolve a busy channel once both parties have a verdict.
            SubState::ChanMatch(c, p, q) => {
                let (Some(vp), Some(vq)) = (verdict_of(st, *p), verdict_of(st, *q)) else {
                    continue;
                };
                let free = SubState::ChanFree(c.clone());
                let (label, remove, add) = match (vp, vq) {
                    (Verdict::Selected(ip, s), Verdict::Selected(iq, s2)) => (
                        RuleLabel::IIIi,
                        [i, ip, iq],
                        vec![SubState::Done(s, *p), SubState::Done(s2, *q), free],
                    ),
                    (Verdict::Selected(ip, s), Verdict::Rejected(iq)) => (
                        RuleLabel::IIIii,
                        [i, ip, iq],
                        vec![SubState::Retry(s), free],
                    ),
                    (Verdict::Rejected(ip), Verdict::Selected(iq, s2)) => (
                        RuleLabel::IIIiii,
                        [i, ip, iq],
                        vec![SubState::Retry(s2), free],
                    ),
                    (Verdict::Rejected(ip), Verdict::Rejected(iq)) => {
                        (RuleLabel::IIIiv, [i, ip, iq], vec![free])
                    }
                };
                out.push((label, replace(st, &remove, add)));
            }
            // (IV.i) Done_s(p) → s(p)
            SubState::Done(s, p) => {
                if let Some(a) = st.syncs.get(s).and_then(|dom| dom.get(p)) {
                    out.push((
                        RuleLabel::IVi,
                        replace(st, &[i], vec![SubState::Released(a.clone())]),
                    ));
                }
            }
            // (IV.ii) Retry_s → (ν p̄′)(□_s′ | p̄′ ↦ ᾱ); the closed s stays behind as junk.
            SubState::Retry(s) => {
                let Some(dom) = st.syncs.get(s) else { continue };
                let mut next = st.clone();
                let rebooted = next.fresh_sync();
                let mut fresh_dom = BTreeMap::new();
                let mut add = vec![SubState::SyncOpen(rebooted)];
                for a in dom.values() {
                    let p = next.fresh_point();
                    fresh_dom.insert(p, a.clone());
                    add.push(SubState::PointBound(p, a.clone()));
                }
                next.syncs.insert(rebooted, fresh_dom);
                next.subs.swap_remove(i);
                next.subs.extend(add);
                next.normalize();
                out.push((RuleLabel::IVii, next));
            }
            _ => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{compile, denote_state};
    use crate::progdsl::{parse_program, Action, ChannelId};

    fn chan(c: &str) -> ChannelId {
        ChannelId::new(c).unwrap()
    }

    fn state(subs: Vec<SubState>, syncs: &[(u32, &[(u32, Action)])]) -> MachineState {
        let mut st = MachineState {
            subs,
            ..Default::default()
        };
        for (s, dom) in syncs {
            st.syncs.insert(
                SyncId(*s),
                dom.iter().map(|(p, a)| (PointId(*p), a.clone())).collect(),
            );
            st.next_sync = st.next_sync.max(s + 1);
            for (p, a) in dom.iter() {
                st.next_point = st.next_point.max(p + 1);
                st.channels.insert(a.channel.clone());
            }
        }
        for sub in &st.subs {
            if let SubState::ChanFree(c) | SubState::ChanMatch(c, _, _) = sub {
                st.channels.insert(c.clone());
            }
        }
        st.normalize();
        st
    }

    fn successors(st: &MachineState) -> Vec<(RuleLabel, MachineState)> {
        machine_step(st).unwrap()
    }

    #[test]
    fn rule_i_matches_complementary_points() {
        let (c, cbar) = (Action::input("c"), Action::output("c"));
        let st = state(
            vec![
                SubState::PointBound(PointId(0), c.clone()),
                SubState::PointBound(PointId(1), cbar.clone()),
                SubState::ChanFree(chan("c")),
                SubState::SyncOpen(SyncId(0)),
                SubState::SyncOpen(SyncId(1)),
            ],
            &[(0, &[(0, c)]), (1, &[(1, cbar)])],
        );
        let next = successors(&st);
        assert_eq!(next.len(), 1);
        let (label, after) = &next[0];
        assert_eq!(*label, RuleLabel::I);
        let mut expected = vec![
            SubState::Candidate(PointId(0)),
            SubState::Candidate(PointId(1)),
            SubState::ChanMatch(chan("c"), PointId(0), PointId(1)),
            SubState::SyncOpen(SyncId(0)),
            SubState::SyncOpen(SyncId(1)),
        ];
        expected.sort();
        assert_eq!(after.subs, expected);
    }

    #[test]
    fn rule_ii_i_closes_open_synchronizer() {
        let c = Action::input("c");
        let cbar = Action::output("c");
        let st = state(
            vec![
                SubState::Candidate(PointId(0)),
                SubState::Candidate(PointId(1)),
                SubState::ChanMatch(chan("c"), PointId(0), PointId(1)),
                SubState::SyncOpen(SyncId(0)),
                SubState::SyncClosed(SyncId(1)),
            ],
            &[(0, &[(0, c)]), (1, &[(1, cbar)])],
        );
        let next = successors(&st);
        let ii_i: Vec<_> = next.iter().filter(|(l, _)| *l == RuleLabel::IIi).collect();
        assert_eq!(ii_i.len(), 1);
        let after = &ii_i[0].1;
        assert!(after.contains(&SubState::SyncClosed(SyncId(0))));
        assert!(after.contains(&SubState::Selected(SyncId(0), PointId(0))));
        assert!(!after.contains(&SubState::SyncOpen(SyncId(0))));
        assert!(!after.contains(&SubState::Candidate(PointId(0))));
        let ii_ii: Vec<_> = next.iter().filter(|(l, _)| *l == RuleLabel::IIii).collect();
        assert_eq!(ii_ii.len(), 1);
        assert!(ii_ii[0].1.contains(&SubState::Rejected(PointId(1))));
        assert!(ii_ii[0].1.contains(&SubState::SyncClosed(SyncId(1))));
    }

    #[test]
    fn rule_iii_iv_frees_channel_after_double_reject() {
        let c = Action::input("c");
        let cbar = Action::output("c");
        let st = state(
            vec![
                SubState::Rejected(PointId(0)),
                SubState::Rejected(PointId(1)),
                SubState::ChanMatch(chan("c"), PointId(0), PointId(1)),
                SubState::ChanFree(chan("d")),
                SubState::ChanFree(chan("e")),
                SubState::SyncClosed(SyncId(0)),
                SubState::SyncClosed(SyncId(1)),
            ],
            &[
                (0, &[(0, c), (2, Action::input("d"))]),
                (1, &[(1, cbar), (3, Action::input("e"))]),
            ],
        );
        let next = successors(&st);
        assert_eq!(next.len(), 1);
        assert_eq!(next[0].0, RuleLabel::IIIiv);
        let mut expected = vec![
            SubState::ChanFree(chan("c")),
            SubState::ChanFree(chan("d")),
            SubState::ChanFree(chan("e")),
            SubState::SyncClosed(SyncId(0)),
            SubState::SyncClosed(SyncId(1)),
        ];
        expected.sort();
        assert_eq!(next[0].1.subs, expected);
    }

    #[test]
    fn selected_pair_commits_then_releases() {
        let st = compile(&parse_program("select(x) | select(!x)").unwrap());
        let mut frontier = vec![st];
        let mut labels = Vec::new();
        // Follow the unique maximal path: I, II.i, II.i, III.i, IV.i, IV.i.
        while let Some(cur) = frontier.pop() {
            let next = successors(&cur);
            if next.is_empty() {
                assert_eq!(denote_state(&cur).to_string(), "{x,!x}");
                break;
            }
            labels.push(next[0].0);
            frontier.push(next[0].1.clone());
        }
        assert_eq!(
            labels,
            vec![
                RuleLabel::I,
                RuleLabel::IIi,
                RuleLabel::IIi,
                RuleLabel::IIIi,
                RuleLabel::IVi,
                RuleLabel::IVi
            ]
        );
    }

    #[test]
    fn reboot_installs_fresh_synchronizer() {
        // select(x,!x) matches against itself: one point is selected, the other
        // rejected, so the attempt is cancelled and rebooted.
        let mut st = compile(&parse_program("select(x,!x)").unwrap());
        let path = [
            RuleLabel::I,
            RuleLabel::IIi,
            RuleLabel::IIii,
            RuleLabel::IIIii,
            RuleLabel::IVii,
        ];
        for want in path {
            let next = successors(&st);
            let (_, s) = next
                .into_iter()
                .find(|(l, _)| *l == want || (want == RuleLabel::IIIii && *l == RuleLabel::IIIiii))
                .unwrap_or_else(|| panic!("no {want} step from {st}"));
            st = s;
        }
        assert!(st.contains(&SubState::SyncClosed(SyncId(0))));
        assert!(st.contains(&SubState::SyncOpen(SyncId(1))));
        let dom: Vec<_> = st.syncs[&SyncId(1)].keys().copied().collect();
        assert_eq!(dom, vec![PointId(2), PointId(3)]);
        assert!(st.contains(&SubState::PointBound(PointId(2), Action::input("x"))));
        assert!(st.contains(&SubState::PointBound(PointId(3), Action::output("x"))));
        assert!(denote_state(&st).is_empty());
    }

    #[test]
    fn malformed_state_is_reported() {
        let st = state(
            vec![
                SubState::ChanFree(chan("c")),
                SubState::ChanMatch(chan("c"), PointId(0), PointId(1)),
            ],
            &[],
        );
        if cfg!(debug_assertions) {
            assert!(matches!(machine_step(&st), Err(MachineError::Invariant(_))));
        }
    }
}
