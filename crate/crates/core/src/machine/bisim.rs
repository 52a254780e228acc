//! Greatest-fixpoint check of the correspondence/safety/progress relation
//! between a source program and its compiled state.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::{
    compile, denote_program, denote_state, explore, program_graph, Denotation, MachineError,
    ProgramGraph, ReachGraph,
};
use crate::progdsl::Program;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClauseVerdict {
    Holds,
    /// The clause's premise is false.
    Vacuous,
    Fails(String),
}

impl ClauseVerdict {
    pub fn passed(&self) -> bool {
        !matches!(self, ClauseVerdict::Fails(_))
    }
}

impl fmt::Display for ClauseVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseVerdict::Holds => f.write_str("pass"),
            ClauseVerdict::Vacuous => f.write_str("pass (vacuous)"),
            ClauseVerdict::Fails(why) => write!(f, "FAIL: {why}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BisimReport {
    pub source: ProgramGraph,
    pub machine: ReachGraph,
    /// Size of the final relation.
    pub related_pairs: usize,
    pub refinement_rounds: usize,
    pub correspondence: ClauseVerdict,
    pub safety: ClauseVerdict,
    pub progress: ClauseVerdict,
}

impl BisimReport {
    /// Whether the initial program and the compiled state are related.
    pub fn passed(&self) -> bool {
        self.correspondence.passed() && self.safety.passed() && self.progress.passed()
    }

    pub fn terminal_denotations(&self) -> BTreeSet<Denotation> {
        self.machine.terminal_denotations()
    }
}

struct Checker<'a> {
    src: &'a ProgramGraph,
    m: &'a ReachGraph,
    preds: Vec<Vec<usize>>,
    // src_reach[i][k]: program state k is reachable from i in zero or more steps.
    src_reach: Vec<Vec<bool>>,
    corr: Vec<Vec<bool>>,
}

impl<'a> Checker<'a> {
    fn new(src: &'a ProgramGraph, m: &'a ReachGraph) -> Self {
        let preds = m.preds();
        let n = src.states.len();
        let mut src_reach = vec![vec![false; n]; n];
        for (i, row) in src_reach.iter_mut().enumerate() {
            let mut stack = vec![i];
            while let Some(k) = stack.pop() {
                if !row[k] {
                    row[k] = true;
                    stack.extend(&src.succ[k]);
                }
            }
        }
        let machine_den: Vec<Denotation> = m.states.iter().map(denote_state).collect();
        let mut by_den: HashMap<Denotation, Vec<bool>> = HashMap::new();
        let corr = src
            .states
            .iter()
            .map(|p| {
                let d = denote_program(p);
                by_den
                    .entry(d.clone())
                    .or_insert_with(|| {
                        m.can_reach((0..m.len()).filter(|&j| machine_den[j] == d), &preds)
                    })
                    .clone()
            })
            .collect();
        Checker {
            src,
            m,
            preds,
            src_reach,
            corr,
        }
    }

    // reaches_plus[k][j]: machine state j reaches, in one or more steps, some j' with rel[k][j'].
    fn reaches_plus(&self, rel: &[Vec<bool>]) -> Vec<Vec<bool>> {
        rel.iter()
            .map(|row| {
                let seeds = (0..self.m.len())
                    .filter(|&j| row[j])
                    .flat_map(|j| self.preds[j].iter().copied());
                self.m.can_reach(seeds, &self.preds)
            })
            .collect()
    }

    fn safety_witness(&self, rel: &[Vec<bool>], i: usize, j: usize) -> Option<usize> {
        self.m.succ[j]
            .iter()
            .copied()
            .find(|&j2| !(0..self.src.states.len()).any(|k| self.src_reach[i][k] && rel[k][j2]))
    }

    fn progress_ok(&self, plus: &[Vec<bool>], i: usize, j: usize) -> bool {
        self.src.succ[i].is_empty() || self.src.succ[i].iter().any(|&k| plus[k][j])
    }

    fn gfp(&self) -> (Vec<Vec<bool>>, usize) {
        let mut rel = self.corr.clone();
        let mut rounds = 0;
        loop {
            rounds += 1;
            let plus = self.reaches_plus(&rel);
            let mut changed = false;
            let mut next = rel.clone();
            for i in 0..self.src.states.len() {
                for j in 0..self.m.len() {
                    if rel[i][j]
                        && (self.safety_witness(&rel, i, j).is_some()
                            || !self.progress_ok(&plus, i, j))
                    {
                        next[i][j] = false;
                        changed = true;
                    }
                }
            }
            rel = next;
            if !changed {
                return (rel, rounds);
            }
        }
    }
}

/// Explores the program and its compiled state, computes the largest relation
/// satisfying correspondence, safety and progress, and reports whether the
/// initial pair belongs to it.
pub fn verify_theorem(p: &Program, max_states: usize) -> Result<BisimReport, MachineError> {
    let machine = explore(&compile(p), max_states)?;
    Ok(verify_on_graph(p, machine))
}

/// As [`verify_theorem`], reusing an exploration of `compile(p)`.
pub fn verify_on_graph(p: &Program, machine: ReachGraph) -> BisimReport {
    let source = program_graph(p);
    let checker = Checker::new(&source, &machine);
    let (rel, rounds) = checker.gfp();
    let plus = checker.reaches_plus(&rel);

    let correspondence = if checker.corr[0][0] {
        ClauseVerdict::Holds
    } else {
        ClauseVerdict::Fails(format!(
            "no state reachable from the compiled state has denotation {}",
            denote_program(&source.states[0])
        ))
    };
    let safety = match checker.safety_witness(&rel, 0, 0) {
        None => ClauseVerdict::Holds,
        Some(j) => ClauseVerdict::Fails(format!(
            "step to machine state {} is matched by no source reduction sequence: {}",
            j, machine.states[j]
        )),
    };
    let progress = if source.succ[0].is_empty() {
        ClauseVerdict::Vacuous
    } else if checker.progress_ok(&plus, 0, 0) {
        ClauseVerdict::Holds
    } else {
        ClauseVerdict::Fails(
            "no machine path of one or more steps reaches a state related to a source reduct"
                .into(),
        )
    };
    let related_pairs = rel
        .iter()
        .map(|row| row.iter().filter(|&&b| b).count())
        .sum();
    BisimReport {
        source,
        machine,
        related_pairs,
        refinement_rounds: rounds,
        correspondence,
        safety,
        progress,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progdsl::parse_program;

    fn verify(text: &str) -> BisimReport {
        verify_theorem(&parse_program(text).unwrap(), 100_000).unwrap()
    }

    #[test]
    fn worked_example_passes() {
        let r = verify("select(!x,!y) | select(y,z) | select(!z) | select(x)");
        assert!(
            r.passed(),
            "{:?} {:?} {:?}",
            r.correspondence,
            r.safety,
            r.progress
        );
        assert_eq!(r.progress, ClauseVerdict::Holds);
    }

    #[test]
    fn bare_actions_pass_immediately() {
        let r = verify("x | !x");
        assert!(r.passed());
        assert_eq!(r.progress, ClauseVerdict::Vacuous);
        assert_eq!(r.machine.len(), 1);
    }

    #[test]
    fn no_pair_passes_vacuously() {
        let r = verify("select(x) | select(z)");
        assert!(r.passed());
        assert_eq!(r.progress, ClauseVerdict::Vacuous);
    }

    #[test]
    fn self_offering_select_passes() {
        assert!(verify("select(x,!x) | select(!x)").passed());
        assert!(verify("select(x,!x)").passed());
    }
}
