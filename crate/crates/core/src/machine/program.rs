//! Source-level semantics: the selective-communication reduction.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::progdsl::{Action, Program, SourceProc};

/// Sorts the parallel components; programs are multisets of processes.
pub fn canonical_program(p: &Program) -> Program {
    let mut procs = p.procs.clone();
    procs.sort();
    Program { procs }
}

/// All one-step reducts: two distinct selects offering complementary actions on
/// some channel are replaced by the two released actions.
pub fn program_step(p: &Program) -> BTreeSet<Program> {
    let mut out = BTreeSet::new();
    for (i, pi) in p.procs.iter().enumerate() {
        let SourceProc::Select(inputs) = pi else {
            continue;
        };
        for (j, pj) in p.procs.iter().enumerate() {
            if i == j {
                continue;
            }
            let SourceProc::Select(outputs) = pj else {
                continue;
            };
            let channels: BTreeSet<_> = inputs
                .iter()
                .filter(|a| a.is_input())
                .filter(|a| outputs.contains(&a.complement()))
                .map(|a| a.channel.clone())
                .collect();
            for c in channels {
                let mut procs: Vec<SourceProc> = p
                    .procs
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, proc)| proc.clone())
                    .collect();
                let a = Action {
                    channel: c,
                    polarity: crate::progdsl::Polarity::Input,
                };
                procs.push(SourceProc::Action(a.complement()));
                procs.push(SourceProc::Action(a));
                out.insert(canonical_program(&Program { procs }));
            }
        }
    }
    out
}

/// Reachable program states, canonicalized. State 0 is the initial program.
#[derive(Debug, Clone)]
pub struct ProgramGraph {
    pub states: Vec<Program>,
    pub succ: Vec<Vec<usize>>,
}

/// Closure of [`program_step`]. Always finite: every step removes two selects.
pub fn program_graph(p: &Program) -> ProgramGraph {
    let start = canonical_program(p);
    let mut index = HashMap::new();
    let mut states = vec![start.clone()];
    let mut succ = vec![Vec::new()];
    index.insert(start, 0usize);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let next = program_step(&states[i]);
        let mut targets = Vec::with_capacity(next.len());
        for q in next {
            let j = *index.entry(q.clone()).or_insert_with(|| {
                states.push(q);
                succ.push(Vec::new());
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            targets.push(j);
        }
        succ[i] = targets;
    }
    ProgramGraph { states, succ }
}
