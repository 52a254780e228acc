//! Exhaustive family of small select-programs.

use std::collections::BTreeSet;

use cmlsync::progdsl::{Action, Program, SourceProc};

const CHANNELS: [&str; 3] = ["x", "y", "z"];

// Channel permutations of x, y, z.
const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn actions() -> Vec<Action> {
    CHANNELS
        .iter()
        .flat_map(|c| [Action::input(c), Action::output(c)])
        .collect()
}

/// Bare actions plus selects over one action or a multiset of two.
pub fn proc_kinds(max_select: usize) -> Vec<SourceProc> {
    let acts = actions();
    let mut out: Vec<SourceProc> = acts.iter().cloned().map(SourceProc::Action).collect();
    let mut multisets: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_select {
        multisets = multisets
            .into_iter()
            .flat_map(|m| {
                let start = m.last().copied().unwrap_or(0);
                let mut grown = vec![m.clone()];
                grown.extend((start..acts.len()).map(|i| {
                    let mut m = m.clone();
                    m.push(i);
                    m
                }));
                grown
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
    }
    for m in multisets.into_iter().filter(|m| !m.is_empty()) {
        out.push(SourceProc::Select(
            m.into_iter().map(|i| acts[i].clone()).collect(),
        ));
    }
    out
}

fn rename(p: &[SourceProc], perm: &[usize; 3]) -> Vec<SourceProc> {
    let map = |a: &Action| {
        let i = CHANNELS
            .iter()
            .position(|c| *c == a.channel.as_str())
            .unwrap();
        Action {
            channel: Action::input(CHANNELS[perm[i]]).channel,
            polarity: a.polarity,
        }
    };
    let mut procs: Vec<SourceProc> = p
        .iter()
        .map(|proc| match proc {
            SourceProc::Action(a) => SourceProc::Action(map(a)),
            SourceProc::Select(v) => {
                let mut v: Vec<Action> = v.iter().map(map).collect();
                v.sort();
                SourceProc::Select(v)
            }
        })
        .collect();
    procs.sort();
    procs
}

/// Every program of 1 to `max_procs` processes over channels x, y, z with
/// selects of at most `max_select` actions, one representative per orbit
/// under channel renaming.
pub fn programs(max_procs: usize, max_select: usize) -> Vec<Program> {
    let kinds = proc_kinds(max_select);
    let mut seen = BTreeSet::new();
    let mut combo: Vec<usize> = Vec::new();
    fn walk(
        kinds: &[SourceProc],
        start: usize,
        max: usize,
        combo: &mut Vec<usize>,
        seen: &mut BTreeSet<Vec<SourceProc>>,
    ) {
        if !combo.is_empty() {
            let procs: Vec<SourceProc> = combo.iter().map(|&k| kinds[k].clone()).collect();
            let canon = PERMS.iter().map(|perm| rename(&procs, perm)).min().unwrap();
            seen.insert(canon);
        }
        if combo.len() == max {
            return;
        }
        for k in start..kinds.len() {
            combo.push(k);
            walk(kinds, k, max, combo, seen);
            combo.pop();
        }
    }
    walk(&kinds, 0, max_procs, &mut combo, &mut seen);
    seen.into_iter().map(Program::new).collect()
}
