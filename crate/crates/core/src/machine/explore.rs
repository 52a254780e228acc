use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};

use rustc_hash::{FxHashMap, FxHashSet};

use super::{
    canonicalize, denote_state, machine_step, Denotation, MachineError, MachineState, RuleLabel,
    SubState,
};
use crate::progdsl::ChannelId;

/// Reachable states of a machine, each a canonical representative. State 0 is
/// the initial state.
#[derive(Debug, Clone, Default)]
pub struct ReachGraph {
    pub states: Vec<MachineState>,
    pub index: FxHashMap<MachineState, usize>,
    /// Deduplicated labelled edges `(from, rule, to)`.
    pub edges: Vec<(usize, RuleLabel, usize)>,
    pub succ: Vec<Vec<usize>>,
}

impl ReachGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn terminals(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| self.succ[i].is_empty())
            .collect()
    }

    pub fn terminal_denotations(&self) -> BTreeSet<Denotation> {
        self.terminals()
            .into_iter()
            .map(|i| denote_state(&self.states[i]))
            .collect()
    }

    pub fn preds(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.states.len()];
        for (i, out) in self.succ.iter().enumerate() {
            for &j in out {
                preds[j].push(i);
            }
        }
        preds
    }

    /// States from which some state in `targets` is reachable in zero or more steps.
    pub fn can_reach(
        &self,
        targets: impl IntoIterator<Item = usize>,
        preds: &[Vec<usize>],
    ) -> Vec<bool> {
        let mut seen = vec![false; self.states.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for t in targets {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    /// One line per edge: `hash -[RULE]-> hash`.
    pub fn to_text(&self) -> String {
        let hashes: Vec<String> = self.states.iter().map(state_hash).collect();
        let mut out = String::new();
        for (from, label, to) in &self.edges {
            let _ = writeln!(out, "{} -[{label}]-> {}", hashes[*from], hashes[*to]);
        }
        out
    }

    fn insert(&mut self, st: MachineState, queue: &mut VecDeque<usize>) -> usize {
        if let Some(&i) = self.index.get(&st) {
            return i;
        }
        let i = self.states.len();
        self.states.push(st.clone());
        self.succ.push(Vec::new());
        self.index.insert(st, i);
        queue.push_back(i);
        i
    }
}

/// 64-bit hash of a state, as 16 hex digits.
pub fn state_hash(st: &MachineState) -> String {
    let mut h = DefaultHasher::new();
    st.hash(&mut h);
    format!("{:016x}", h.finish())
}

/// Breadth-first exploration modulo renaming. Fails once more than
/// `max_states` distinct states are found.
pub fn explore(start: &MachineState, max_states: usize) -> Result<ReachGraph, MachineError> {
    let mut g = ReachGraph::default();
    let mut queue = VecDeque::new();
    g.insert(canonicalize(start), &mut queue);
    while let Some(i) = queue.pop_front() {
        let next = machine_step(&g.states[i])?;
        let mut seen = FxHashSet::default();
        for (label, st) in next {
            let j = g.insert(canonicalize(&st), &mut queue);
            if seen.insert((label, j)) {
                g.edges.push((i, label, j));
                if !g.succ[i].contains(&j) {
                    g.succ[i].push(j);
                }
            }
        }
        if g.states.len() > max_states {
            return Err(MachineError::BoundExceeded {
                limit: max_states,
                partial: Box::new(g),
            });
        }
    }
    Ok(g)
}

/// Reachable states holding complementary unmatched points on a channel from
/// which no state with that channel free is reachable.
pub fn liveness_counterexamples(g: &ReachGraph) -> Vec<(usize, ChannelId)> {
    let preds = g.preds();
    let channels: BTreeSet<ChannelId> = g
        .states
        .iter()
        .flat_map(|s| s.channels.iter().cloned())
        .collect();
    let mut out = Vec::new();
    for c in channels {
        let free = SubState::ChanFree(c.clone());
        let good = g.can_reach(
            (0..g.len()).filter(|&i| g.states[i].contains(&free)),
            &preds,
        );
        for (i, st) in g.states.iter().enumerate() {
            if good[i] {
                continue;
            }
            let bound = |input: bool| {
                st.subs
                    .iter()
                    .any(|s| matches!(s, SubState::PointBound(_, a) if a.channel == c && a.is_input() == input))
            };
            if bound(true) && bound(false) {
                out.push((i, c.clone()));
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

    fn graph(text: &str) -> ReachGraph {
        explore(&compile(&parse_program(text).unwrap()), 100_000).unwrap()
    }

    #[test]
    fn bare_action_is_a_single_terminal_state() {
        let g = graph("x");
        assert_eq!(g.len(), 1);
        assert_eq!(g.terminals(), vec![0]);
        assert_eq!(
            g.terminal_denotations().iter().next().unwrap().to_string(),
            "{x}"
        );
    }

    #[test]
    fn worked_example_terminal_denotations() {
        let g = graph("select(!x,!y) | select(y,z) | select(!z) | select(x)");
        let finals: Vec<String> = g
            .terminal_denotations()
            .iter()
            .map(|d| d.to_string())
            .collect();
        assert_eq!(finals, vec!["{x,!x,z,!z}", "{y,!y}"]);
        assert!(liveness_counterexamples(&g).is_empty());
    }

    #[test]
    fn single_pair_always_releases_both() {
        let g = graph("select(x) | select(!x)");
        for t in g.terminals() {
            assert_eq!(denote_state(&g.states[t]).to_string(), "{x,!x}");
        }
    }

    #[test]
    fn self_match_loops_back() {
        let g = graph("select(x,!x)");
        assert!(g.terminals().is_empty());
        assert!(g
            .edges
            .iter()
            .any(|&(_, l, to)| l == RuleLabel::IVii && to == 0));
    }

    #[test]
    fn bound_is_enforced() {
        let st = compile(
            &parse_program("select(!x,!y) | select(y,z) | select(!z) | select(x)").unwrap(),
        );
        match explore(&st, 3) {
            Err(MachineError::BoundExceeded { limit, partial }) => {
                assert_eq!(limit, 3);
                assert!(partial.len() > 3);
            }
            other => panic!("expected bound error, got {other:?}"),
        }
    }

    #[test]
    fn text_export_has_one_line_per_edge() {
        let g = graph("select(x) | select(!x)");
        let text = g.to_text();
        assert_eq!(text.lines().count(), g.edges.len());
        for line in text.lines() {
            let parts: Vec<&str> = line.split(' ').collect();
            assert_eq!(parts.len(), 3, "{line}");
            assert!(parts[1].starts_with("-[") && parts[1].ends_with("]->"));
            for h in [parts[0], parts[2]] {
                assert!(h.len() == 16 && h.chars().all(|c| c.is_ascii_hexdigit()));
            }
        }
    }
}
