//! The `modelcheck` command.

use std::fmt::Write as _;

use cmlsync::machine::{
    check_invariants, compile, explore, liveness_counterexamples, verify_on_graph, MachineError,
};
use cmlsync::progdsl::parse_program;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BOUND: i32 = 3;

/// Checks one program and returns the exit status with a `key: value` report.
/// With `graph`, the explored transitions are appended one per line.
pub fn modelcheck(text: &str, max_states: usize, graph: bool) -> (i32, String) {
    let mut out = String::new();
    let program = match parse_program(text) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return (EXIT_PARSE, out);
        }
    };
    let start = compile(&program);
    let _ = writeln!(out, "program: {program}");
    let _ = writeln!(out, "compiled: {start}");
    let g = match explore(&start, max_states) {
        Ok(g) => g,
        Err(MachineError::BoundExceeded { limit, partial }) => {
            let _ = writeln!(
                out,
                "error: state bound {limit} exceeded ({} states found)",
                partial.len()
            );
            return (EXIT_BOUND, out);
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return (EXIT_FAIL, out);
        }
    };
    let _ = writeln!(out, "states: {}", g.len());
    let _ = writeln!(out, "edges: {}", g.edges.len());
    for d in g.terminal_denotations() {
        let _ = writeln!(out, "terminal: {d}");
    }

    let violations: Vec<_> = g
        .states
        .iter()
        .enumerate()
        .flat_map(|(i, st)| check_invariants(st).into_iter().map(move |v| (i, v)))
        .collect();
    let invariants_ok = violations.is_empty();
    match violations.first() {
        None => {
            let _ = writeln!(out, "invariants: pass");
        }
        Some((i, v)) => {
            let _ = writeln!(
                out,
                "invariants: FAIL: {} violations, first in state {i}: {v}",
                violations.len()
            );
        }
    }
    let stuck = liveness_counterexamples(&g);
    match stuck.first() {
        None => {
            let _ = writeln!(out, "channel liveness: pass");
        }
        Some((i, c)) => {
            let _ = writeln!(out, "channel liveness: FAIL: state {i} never frees {c}");
        }
    }
    let dump = graph.then(|| g.to_text());
    let report = verify_on_graph(&program, g);
    let _ = writeln!(out, "correspondence: {}", report.correspondence);
    let _ = writeln!(out, "safety: {}", report.safety);
    let _ = writeln!(out, "progress: {}", report.progress);
    let pass = invariants_ok && stuck.is_empty() && report.passed();
    let _ = writeln!(out, "verdict: {}", if pass { "pass" } else { "FAIL" });
    if let Some(text) = dump {
        out.push_str(&text);
    }
    (if pass { EXIT_PASS } else { EXIT_FAIL }, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines_with<'a>(report: &'a str, key: &str) -> Vec<&'a str> {
        report
            .lines()
            .filter_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
            .collect()
    }

    #[test]
    fn worked_example_reports_both_outcomes() {
        let (code, report) = modelcheck(
            "select(!x,!y) | select(y,z) | select(!z) | select(x)",
            100_000,
            false,
        );
        assert_eq!(code, EXIT_PASS, "{report}");
        assert_eq!(
            lines_with(&report, "terminal"),
            vec!["{x,!x,z,!z}", "{y,!y}"]
        );
        for key in ["correspondence", "safety", "progress", "invariants"] {
            assert_eq!(lines_with(&report, key), vec!["pass"], "{key}");
        }
    }

    #[test]
    fn released_pair_passes() {
        let (code, report) = modelcheck("x | !x", 100, false);
        assert_eq!(code, EXIT_PASS, "{report}");
        assert_eq!(lines_with(&report, "states"), vec!["1"]);
    }

    #[test]
    fn stuck_program_passes_vacuously() {
        let (code, report) = modelcheck("select(x) | select(z)", 100, false);
        assert_eq!(code, EXIT_PASS, "{report}");
        assert_eq!(lines_with(&report, "progress"), vec!["pass (vacuous)"]);
    }

    #[test]
    fn parse_error_exits_2() {
        assert_eq!(modelcheck("select(", 100, false).0, EXIT_PARSE);
    }

    #[test]
    fn bound_exits_3() {
        let (code, report) = modelcheck(
            "select(!x,!y) | select(y,z) | select(!z) | select(x)",
            3,
            false,
        );
        assert_eq!(code, EXIT_BOUND);
        assert!(report.contains("state bound 3"), "{report}");
    }

    #[test]
    fn graph_dump_lists_edges() {
        let (_, report) = modelcheck("select(x) | select(!x)", 100, true);
        let edges: usize = lines_with(&report, "edges")[0].parse().unwrap();
        assert_eq!(report.lines().filter(|l| l.contains("]-> ")).count(), edges);
    }
}
