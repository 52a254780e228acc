//! Live workloads over the event library, shared by the demo, the stress
//! command and the acceptance suite.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use cmlsync::events::{
    self, choose, guard, guard_async, sync, sync_with_retries, wrap, wrapabort, Channel, Event,
};
use cmlsync::guarded::{self, GChannel};
use cmlsync::Cell;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::task::JoinHandle;
use tokio::time::timeout;

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
    #[error("check failed: {0}")]
    Check(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

async fn join_all<T>(
    handles: Vec<JoinHandle<T>>,
    limit: Duration,
) -> Result<Vec<T>, WorkloadError> {
    let all = async {
        let mut out = Vec::with_capacity(handles.len());
        for h in handles {
            out.push(h.await?);
        }
        Ok::<_, WorkloadError>(out)
    };
    timeout(limit, all)
        .await
        .map_err(|_| WorkloadError::Timeout(limit))?
}

async fn yields(n: u32) {
    for _ in 0..n {
        tokio::task::yield_now().await;
    }
}

/// How receivers take values in [`rendezvous`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceiverKind {
    Plain,
    /// Guarded channel with an always-true predicate.
    GuardedTrue,
}

/// Per-channel sorted values sent and received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub sent: BTreeMap<usize, Vec<u64>>,
    pub received: BTreeMap<usize, Vec<u64>>,
}

impl Transfer {
    pub fn balanced(&self) -> bool {
        self.sent == self.received
    }
}

/// `pairs` concurrent `send`/`accept` pairs spread round-robin over `channels`.
pub async fn rendezvous(
    pairs: usize,
    channels: usize,
    kind: ReceiverKind,
    limit: Duration,
) -> Result<Transfer, WorkloadError> {
    if channels == 0 {
        return Err(WorkloadError::Config("need at least one channel".into()));
    }
    let mut sent: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    let mut senders = Vec::new();
    let mut receivers = Vec::new();
    match kind {
        ReceiverKind::Plain => {
            let chans: Vec<Channel<u64>> = (0..channels).map(|_| Channel::new()).collect();
            for i in 0..pairs {
                let c = chans[i % channels].clone();
                let m = i as u64;
                sent.entry(i % channels).or_default().push(m);
                senders.push(tokio::spawn(async move { events::send(&c, m).await }));
                let c = chans[i % channels].clone();
                receivers.push(tokio::spawn(async move {
                    (i % channels, events::accept(&c).await)
                }));
            }
        }
        ReceiverKind::GuardedTrue => {
            let chans: Vec<GChannel<u64>> = (0..channels).map(|_| GChannel::new()).collect();
            for i in 0..pairs {
                let c = chans[i % channels].clone();
                let m = i as u64;
                sent.entry(i % channels).or_default().push(m);
                senders.push(tokio::spawn(async move {
                    sync(&guarded::transmit(&c, m)).await
                }));
                let c = chans[i % channels].clone();
                receivers.push(tokio::spawn(async move {
                    (i % channels, sync(&guarded::receive_if(&c, |_| true)).await)
                }));
            }
        }
    }
    let started = Instant::now();
    let got = join_all(receivers, limit).await?;
    join_all(senders, limit.saturating_sub(started.elapsed())).await?;
    let mut received: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (c, m) in got {
        received.entry(c).or_default().push(m);
    }
    for v in sent.values_mut().chain(received.values_mut()) {
        v.sort_unstable();
    }
    Ok(Transfer { sent, received })
}

/// Choice over `branches` whose order is reshuffled, after a random number of
/// yields, on every attempt.
pub fn jittered<T: Send + 'static>(
    rng: Arc<Mutex<ChaCha8Rng>>,
    branches: impl Fn() -> Vec<Event<T>> + Send + Sync + 'static,
) -> Event<T> {
    let branches = Arc::new(branches);
    guard_async(move || {
        let (rng, branches) = (Arc::clone(&rng), Arc::clone(&branches));
        async move {
            let mut evs = branches();
            let n = {
                let mut rng = rng.lock().unwrap();
                evs.shuffle(&mut *rng);
                rng.random_range(0..4)
            };
            yields(n).await;
            choose(evs)
        }
    })
}

#[derive(Clone, Debug)]
pub struct StressConfig {
    pub tasks: usize,
    pub channels: usize,
    pub seed: u64,
    pub guarded: bool,
    pub timeout: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StressStats {
    pub completed: usize,
    pub retries: u64,
    pub max_retries: u32,
    pub elapsed: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Sent(u64),
    Received(u64),
}

/// Tasks are paired up and every pair gets one of `channels` channels. Each
/// task synchronizes once on `choose [transmit c id, receive c]`, so both
/// parties of every rendezvous are inside a choice. Every channel carries an
/// even number of such tasks, so any maximal matching is complete.
///
/// With `guarded`, channels are guarded, messages are even and receivers only
/// accept even values.
pub async fn stress(cfg: &StressConfig) -> Result<StressStats, WorkloadError> {
    if !cfg.tasks.is_multiple_of(2) {
        return Err(WorkloadError::Config(format!(
            "task count {} is odd",
            cfg.tasks
        )));
    }
    if cfg.channels == 0 && cfg.tasks > 0 {
        return Err(WorkloadError::Config("need at least one channel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..cfg.tasks).collect();
    order.shuffle(&mut rng);
    let mut channel_of = vec![0; cfg.tasks];
    for pair in order.chunks(2) {
        let c = rng.random_range(0..cfg.channels);
        for &t in pair {
            channel_of[t] = c;
        }
    }
    let task_rng =
        |rng: &mut ChaCha8Rng| Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(rng.random())));

    let started = Instant::now();
    let mut handles: Vec<JoinHandle<(Role, u32)>> = Vec::with_capacity(cfg.tasks);
    if cfg.guarded {
        let chans: Vec<GChannel<u64>> = (0..cfg.channels).map(|_| GChannel::new()).collect();
        for (t, &ci) in channel_of.iter().enumerate() {
            let c = chans[ci].clone();
            let id = 2 * t as u64;
            let ev = jittered(task_rng(&mut rng), move || {
                vec![
                    wrap(guarded::transmit(&c, id), move |()| Role::Sent(id)),
                    wrap(guarded::receive_if(&c, |m| m % 2 == 0), Role::Received),
                ]
            });
            handles.push(tokio::spawn(async move { sync_with_retries(&ev).await }));
        }
    } else {
        let chans: Vec<Channel<u64>> = (0..cfg.channels).map(|_| Channel::new()).collect();
        for (t, &ci) in channel_of.iter().enumerate() {
            let c = chans[ci].clone();
            let id = t as u64;
            let ev = jittered(task_rng(&mut rng), move || {
                vec![
                    wrap(events::transmit(&c, id), move |()| Role::Sent(id)),
                    wrap(events::receive(&c), Role::Received),
                ]
            });
            handles.push(tokio::spawn(async move { sync_with_retries(&ev).await }));
        }
    }
    let results = join_all(handles, cfg.timeout).await?;
    let elapsed = started.elapsed();

    let mut sent = Vec::new();
    let mut received = Vec::new();
    for (t, (role, _)) in results.iter().enumerate() {
        let own = if cfg.guarded { 2 * t as u64 } else { t as u64 };
        match *role {
            Role::Sent(m) => sent.push(m),
            Role::Received(m) if m == own => {
                return Err(WorkloadError::Check(format!(
                    "task {t} received its own message"
                )))
            }
            Role::Received(m) => received.push(m),
        }
    }
    sent.sort_unstable();
    received.sort_unstable();
    if sent != received {
        return Err(WorkloadError::Check(
            "values sent and received differ".into(),
        ));
    }
    Ok(StressStats {
        completed: results.len(),
        retries: results.iter().map(|(_, r)| u64::from(*r)).sum(),
        max_retries: results.iter().map(|(_, r)| *r).max().unwrap_or(0),
        elapsed,
    })
}

/// Abort counts of the three `wrapabort` scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbortCounts {
    /// Abort on the losing branch of a choice.
    pub losing: u32,
    /// Abort on the committing branch of a choice.
    pub winning: u32,
    /// Abort around a whole choice whose inner branch commits.
    pub outer: u32,
}

fn counting_abort<T: Send + 'static>(
    counter: &Arc<AtomicU32>,
    done: &Cell<()>,
    v: Event<T>,
) -> Event<T> {
    let (counter, done) = (Arc::clone(counter), done.clone());
    wrapabort(
        move || {
            let (counter, done) = (Arc::clone(&counter), done.clone());
            async move {
                counter.fetch_add(1, Ordering::SeqCst);
                done.put(()).await;
            }
        },
        v,
    )
}

/// Runs each scenario once. `settle` is how long to keep waiting for abort
/// actions that must not run.
pub async fn abort_scenarios(
    settle: Duration,
    limit: Duration,
) -> Result<AbortCounts, WorkloadError> {
    let counters: [Arc<AtomicU32>; 3] = Default::default();
    let fired = Cell::new();

    // Losing branch: partner sends on d.
    let (c, d) = (Channel::<u8>::new(), Channel::<u8>::new());
    let ev = choose(vec![
        counting_abort(&counters[0], &fired, events::receive(&c)),
        events::receive(&d),
    ]);
    let d2 = d.clone();
    tokio::spawn(async move { events::send(&d2, 1).await });
    timeout(limit, sync(&ev))
        .await
        .map_err(|_| WorkloadError::Timeout(limit))?;
    timeout(limit, fired.get())
        .await
        .map_err(|_| WorkloadError::Timeout(limit))?;

    // Winning branch: partner sends on c.
    let (c, d) = (Channel::<u8>::new(), Channel::<u8>::new());
    let ev = choose(vec![
        counting_abort(&counters[1], &fired, events::receive(&c)),
        events::receive(&d),
    ]);
    let c2 = c.clone();
    tokio::spawn(async move { events::send(&c2, 1).await });
    timeout(limit, sync(&ev))
        .await
        .map_err(|_| WorkloadError::Timeout(limit))?;

    // Around the whole choice.
    let (c, d) = (Channel::<u8>::new(), Channel::<u8>::new());
    let ev = counting_abort(
        &counters[2],
        &fired,
        choose(vec![events::receive(&c), events::receive(&d)]),
    );
    let c2 = c.clone();
    tokio::spawn(async move { events::send(&c2, 1).await });
    timeout(limit, sync(&ev))
        .await
        .map_err(|_| WorkloadError::Timeout(limit))?;

    tokio::time::sleep(settle).await;
    let [a, b, c] = counters.map(|n| n.load(Ordering::SeqCst));
    Ok(AbortCounts {
        losing: a,
        winning: b,
        outer: c,
    })
}

/// Guard executions and observed retries of one sync call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuardCount {
    pub runs: u32,
    pub retries: u32,
}

/// Synchronizes a guarded self-matching choice that keeps cancelling until
/// `min_retries` attempts have failed and a partner is admitted.
pub async fn guard_multiplicity(
    min_retries: u32,
    limit: Duration,
) -> Result<GuardCount, WorkloadError> {
    let c = Channel::<u8>::new();
    let runs = Arc::new(AtomicU32::new(0));
    let (r, c2) = (Arc::clone(&runs), c.clone());
    let ev = guard(move || {
        r.fetch_add(1, Ordering::SeqCst);
        choose(vec![
            wrap(events::transmit(&c2, 1), |()| 0),
            events::receive(&c2),
        ])
    });
    let attempt = tokio::spawn(async move { sync_with_retries(&ev).await });
    let partner = async {
        while runs.load(Ordering::SeqCst) < min_retries + 1 {
            tokio::task::yield_now().await;
        }
        events::accept(&c).await
    };
    let run = async {
        partner.await;
        attempt.await
    };
    let (_, retries) = timeout(limit, run)
        .await
        .map_err(|_| WorkloadError::Timeout(limit))??;
    Ok(GuardCount {
        runs: runs.load(Ordering::SeqCst),
        retries,
    })
}

/// Values returned by even-only receivers on `channels` guarded channels fed
/// `messages` random values in total.
pub async fn even_receivers(
    messages: usize,
    channels: usize,
    seed: u64,
    limit: Duration,
) -> Result<(Vec<u32>, Vec<u32>), WorkloadError> {
    if channels == 0 {
        return Err(WorkloadError::Config("need at least one channel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chans: Vec<GChannel<u32>> = (0..channels).map(|_| GChannel::new()).collect();
    let mut evens = Vec::new();
    let mut receivers = Vec::new();
    for i in 0..messages {
        let c = chans[i % channels].clone();
        let m: u32 = rng.random();
        tokio::spawn(async move { sync(&guarded::transmit(&c, m)).await });
        if m.is_multiple_of(2) {
            evens.push(m);
            let c = chans[i % channels].clone();
            receivers.push(tokio::spawn(async move {
                sync(&guarded::receive_if(&c, |m: &u32| m.is_multiple_of(2))).await
            }));
        }
    }
    let mut got = join_all(receivers, limit).await?;
    got.sort_unstable();
    evens.sort_unstable();
    Ok((evens, got))
}

/// One randomized schedule of putters and getters on a shared cell. Returns
/// the sorted values put and got.
pub async fn cell_schedule(
    seed: u64,
    max_tasks: usize,
    limit: Duration,
) -> Result<(Vec<u64>, Vec<u64>), WorkloadError> {
    if max_tasks < 2 {
        return Err(WorkloadError::Config("need at least two tasks".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks = rng.random_range(2..=max_tasks);
    let putters = rng.random_range(1..tasks);
    let getters = tasks - putters;
    let values = rng.random_range(1..=64u64);
    let base = seed.wrapping_mul(1_000);
    let mut per_putter = vec![Vec::new(); putters];
    let mut put_values = Vec::new();
    for k in 0..values {
        let v = base.wrapping_add(k);
        per_putter[rng.random_range(0..putters)].push(v);
        put_values.push(v);
    }
    let mut per_getter = vec![0u64; getters];
    for _ in 0..values {
        per_getter[rng.random_range(0..getters)] += 1;
    }

    let cell = Cell::<u64>::new();
    let mut handles: Vec<JoinHandle<Vec<u64>>> = Vec::new();
    for vs in per_putter {
        let cell = cell.clone();
        let pauses: Vec<u32> = vs.iter().map(|_| rng.random_range(0..3)).collect();
        handles.push(tokio::spawn(async move {
            for (v, n) in vs.into_iter().zip(pauses) {
                yields(n).await;
                cell.put(v).await;
            }
            Vec::new()
        }));
    }
    for n in per_getter {
        let cell = cell.clone();
        let plan: Vec<(u32, bool)> = (0..n)
            .map(|_| (rng.random_range(0..3), rng.random_bool(0.3)))
            .collect();
        handles.push(tokio::spawn(async move {
            let mut got = Vec::new();
            for (pause, polling) in plan {
                yields(pause).await;
                let v = if polling {
                    loop {
                        if let Some(v) = cell.get_timeout(Duration::from_micros(50)).await {
                            break v;
                        }
                    }
                } else {
                    cell.get().await
                };
                got.push(v);
            }
            got
        }));
    }
    let mut got: Vec<u64> = join_all(handles, limit)
        .await?
        .into_iter()
        .flatten()
        .collect();
    if cell.is_full() {
        return Err(WorkloadError::Check("cell still holds a value".into()));
    }
    got.sort_unstable();
    put_values.sort_unstable();
    Ok((put_values, got))
}

/// Outcome of one live run of `select(!x,!y) | select(y,z) | select(!z) | select(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExampleOutcome {
    /// Rendezvous on x and z.
    XZ,
    /// Rendezvous on y.
    Y,
}

/// Runs the four selects as live tasks. Exactly one outcome is possible per
/// run; the tasks left without a partner are abandoned.
pub async fn worked_example(seed: u64, limit: Duration) -> Result<ExampleOutcome, WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_rng = || Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(rng.random())));
    let (x, y, z) = (
        Channel::<()>::new(),
        Channel::<()>::new(),
        Channel::<()>::new(),
    );
    let done = Cell::<char>::new();
    let report = |done: &Cell<char>, tag: char| {
        let done = done.clone();
        move |()| {
            let done = done.clone();
            drop(tokio::spawn(async move { done.put(tag).await }));
        }
    };
    let (x1, y1) = (x.clone(), y.clone());
    let (r1x, r1y) = (report(&done, 'x'), report(&done, 'y'));
    let p1 = jittered(next_rng(), move || {
        vec![
            wrap(events::transmit(&x1, ()), r1x.clone()),
            wrap(events::transmit(&y1, ()), r1y.clone()),
        ]
    });
    let (y2, z2) = (y.clone(), z.clone());
    let (r2y, r2z) = (report(&done, 'y'), report(&done, 'z'));
    let p2 = jittered(next_rng(), move || {
        vec![
            wrap(events::receive(&y2), r2y.clone()),
            wrap(events::receive(&z2), r2z.clone()),
        ]
    });
    let z3 = z.clone();
    let r3 = report(&done, 'z');
    let p3 = jittered(next_rng(), move || {
        vec![wrap(events::transmit(&z3, ()), r3.clone())]
    });
    let x4 = x.clone();
    let r4 = report(&done, 'x');
    let p4 = jittered(next_rng(), move || {
        vec![wrap(events::receive(&x4), r4.clone())]
    });
    for p in [p1, p2, p3, p4] {
        drop(tokio::spawn(async move { sync(&p).await }));
    }
    let first = timeout(limit, done.get())
        .await
        .map_err(|_| WorkloadError::Timeout(limit))?;
    if first == 'y' {
        let second = timeout(limit, done.get())
            .await
            .map_err(|_| WorkloadError::Timeout(limit))?;
        return match second {
            'y' => Ok(ExampleOutcome::Y),
            other => Err(WorkloadError::Check(format!(
                "y rendezvous mixed with {other}"
            ))),
        };
    }
    let mut seen = vec![first];
    while seen.len() < 4 {
        let next = timeout(limit, done.get())
            .await
            .map_err(|_| WorkloadError::Timeout(limit))?;
        seen.push(next);
    }
    seen.sort_unstable();
    if seen == ['x', 'x', 'z', 'z'] {
        Ok(ExampleOutcome::XZ)
    } else {
        Err(WorkloadError::Check(format!("unexpected commits {seen:?}")))
    }
}
