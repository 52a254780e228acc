//! The `demo` and `stress` commands.

use std::fmt::Write as _;
use std::future::Future;
use std::pin::Pin;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokio::time::timeout;

use crate::workloads::{self, ReceiverKind, StressConfig, WorkloadError};

type Scenario =
    fn(u64, Duration) -> Pin<Box<dyn Future<Output = Result<String, WorkloadError>> + Send>>;

fn check(ok: bool, what: impl Into<String>) -> Result<(), WorkloadError> {
    if ok {
        Ok(())
    } else {
        Err(WorkloadError::Check(what.into()))
    }
}

const SCENARIOS: [(&str, Scenario); 6] = [
    ("rendezvous", |_, limit| {
        Box::pin(async move {
            let t = workloads::rendezvous(100, 10, ReceiverKind::Plain, limit).await?;
            check(t.balanced(), "sent and received values differ")?;
            Ok("100 pairs on 10 channels".into())
        })
    }),
    ("symmetric choose", |seed, limit| {
        Box::pin(async move {
            let cfg = StressConfig {
                tasks: 20,
                channels: 5,
                seed,
                guarded: false,
                timeout: limit,
            };
            let s = workloads::stress(&cfg).await?;
            Ok(format!("20 tasks, {} retries", s.retries))
        })
    }),
    ("wrapabort", |_, limit| {
        Box::pin(async move {
            let n = workloads::abort_scenarios(Duration::from_millis(5), limit).await?;
            check(
                n.losing == 1,
                format!("losing branch abort ran {} times", n.losing),
            )?;
            check(n.winning == 0, "abort on the committed branch ran")?;
            check(n.outer == 0, "abort around the committed choice ran")?;
            Ok("losing 1, winning 0, outer 0".into())
        })
    }),
    ("guard count", |_, limit| {
        Box::pin(async move {
            let g = workloads::guard_multiplicity(2, limit).await?;
            check(
                g.runs == g.retries + 1,
                format!("{} runs for {} retries", g.runs, g.retries),
            )?;
            Ok(format!("{} runs, {} retries", g.runs, g.retries))
        })
    }),
    ("guarded receive", |seed, limit| {
        Box::pin(async move {
            let (evens, got) = workloads::even_receivers(200, 10, seed, limit).await?;
            check(got.iter().all(|m| m % 2 == 0), "odd value received")?;
            check(evens == got, "even values lost or duplicated")?;
            Ok(format!("{} even values received", got.len()))
        })
    }),
    ("worked example", |seed, limit| {
        Box::pin(async move {
            let outcome = workloads::worked_example(seed, limit).await?;
            Ok(format!("{outcome:?}"))
        })
    }),
];

/// Runs every scenario in a seed-determined order. Exit status 1 if any fails.
pub async fn demo(limit: Duration, seed: u64) -> (i32, String) {
    let mut order: Vec<usize> = (0..SCENARIOS.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = String::new();
    let _ = writeln!(out, "seed: {seed}");
    let mut failed = 0;
    for i in order {
        let (name, run) = SCENARIOS[i];
        let result = match timeout(limit, run(seed, limit)).await {
            Ok(r) => r,
            Err(_) => Err(WorkloadError::Timeout(limit)),
        };
        match result {
            Ok(detail) => {
                let _ = writeln!(out, "{name}: pass ({detail})");
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(out, "{name}: FAIL: {e}");
            }
        }
    }
    (i32::from(failed > 0), out)
}

/// Runs one stress configuration. Exit status 1 on timeout or a failed check.
pub async fn stress(cfg: &StressConfig) -> (i32, String) {
    let mut out = String::new();
    let _ = writeln!(out, "seed: {}", cfg.seed);
    let _ = writeln!(out, "tasks: {}", cfg.tasks);
    let _ = writeln!(out, "channels: {}", cfg.channels);
    let _ = writeln!(out, "guarded: {}", cfg.guarded);
    match workloads::stress(cfg).await {
        Ok(s) => {
            let secs = s.elapsed.as_secs_f64();
            let _ = writeln!(out, "completed: {}", s.completed);
            let _ = writeln!(out, "retries: {}", s.retries);
            let _ = writeln!(out, "max retries: {}", s.max_retries);
            let _ = writeln!(out, "elapsed ms: {:.3}", secs * 1e3);
            if secs > 0.0 {
                let _ = writeln!(out, "syncs per second: {:.0}", s.completed as f64 / secs);
            }
            (0, out)
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            (1, out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn default_demo_passes() {
        let (code, report) = demo(Duration::from_secs(10), 7).await;
        assert_eq!(code, 0, "{report}");
        assert_eq!(
            report.lines().filter(|l| l.contains(": pass")).count(),
            SCENARIOS.len()
        );
    }

    #[tokio::test]
    async fn zero_timeout_fails() {
        let (code, report) = demo(Duration::ZERO, 7).await;
        assert_eq!(code, 1);
        assert!(report.contains("timed out"), "{report}");
    }

    #[tokio::test]
    async fn seed_fixes_scenario_order() {
        let names = |r: &str| {
            r.lines()
                .skip(1)
                .map(|l| l.split(':').next().unwrap().to_string())
                .collect::<Vec<_>>()
        };
        let a = demo(Duration::ZERO, 3).await.1;
        let b = demo(Duration::ZERO, 3).await.1;
        assert_eq!(names(&a), names(&b));
    }

    #[tokio::test]
    async fn single_pair_is_fast() {
        let cfg = StressConfig {
            tasks: 2,
            channels: 1,
            seed: 1,
            guarded: false,
            timeout: Duration::from_millis(100),
        };
        let (code, report) = stress(&cfg).await;
        assert_eq!(code, 0, "{report}");
    }

    #[tokio::test]
    async fn default_stress_completes() {
        for guarded in [false, true] {
            let cfg = StressConfig {
                tasks: 200,
                channels: 50,
                seed: 11,
                guarded,
                timeout: Duration::from_secs(30),
            };
            let (code, report) = stress(&cfg).await;
            assert_eq!(code, 0, "{report}");
            assert!(report.contains("completed: 200"), "{report}");
        }
    }
}
