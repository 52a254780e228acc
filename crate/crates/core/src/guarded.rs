//! Channels with guarded receives.
//!
//! A receiver registers a predicate together with its candidate cell and a
//! sender registers its message. The channel actor only offers a pair to the
//! synchronizers when the message satisfies the predicate; otherwise it answers
//! both candidates with `None` and both points register again.

use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::cell::Cell;
use crate::events::{Decision, Event, Point, SessionOutcome, Synchronizer};

/// `None` means "no match, register again".
pub type GCandidate = Cell<Option<Decision>>;
pub type Predicate<T> = Arc<dyn Fn(&T) -> bool + Send + Sync>;
pub type GIn<T> = Cell<(GCandidate, Predicate<T>)>;
pub type GOut<T> = Cell<(GCandidate, T)>;

/// Counters kept by a guarded channel.
#[derive(Debug, Default)]
pub struct GuardStats {
    registrations: AtomicU64,
    sessions: AtomicU64,
    bounces: AtomicU64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct GuardCounts {
    /// Point registrations, including re-registrations after a bounce.
    pub registrations: u64,
    pub sessions: u64,
    /// Sessions whose message failed the predicate.
    pub bounces: u64,
}

impl GuardStats {
    pub fn snapshot(&self) -> GuardCounts {
        GuardCounts {
            registrations: self.registrations.load(Ordering::SeqCst),
            sessions: self.sessions.load(Ordering::SeqCst),
            bounces: self.bounces.load(Ordering::SeqCst),
        }
    }
}

pub struct GChannel<T> {
    pub input: GIn<T>,
    pub output: GOut<T>,
    pub payload: Cell<T>,
    pub stats: Arc<GuardStats>,
}

impl<T> Clone for GChannel<T> {
    fn clone(&self) -> Self {
        GChannel {
            input: self.input.clone(),
            output: self.output.clone(),
            payload: self.payload.clone(),
            stats: Arc::clone(&self.stats),
        }
    }
}

impl<T: Send + 'static> GChannel<T> {
    /// Fresh guarded channel served by its own actor task. Panics outside a
    /// tokio runtime.
    pub fn new() -> Self {
        let ch = GChannel {
            input: Cell::new(),
            output: Cell::new(),
            payload: Cell::new(),
            stats: Arc::default(),
        };
        let (i, o, stats) = (ch.input.clone(), ch.output.clone(), Arc::clone(&ch.stats));
        drop(tokio::spawn(g_channel_actor(i, o, stats)));
        ch
    }
}

impl<T: Send + 'static> Default for GChannel<T> {
    fn default() -> Self {
        GChannel::new()
    }
}

/// `None` if the pair was bounced.
pub async fn g_channel_session<T>(i: &GIn<T>, o: &GOut<T>) -> Option<SessionOutcome> {
    let (candidate_i, cond) = i.get().await;
    let (candidate_o, m) = o.get().await;
    if !cond(&m) {
        candidate_i.put(None).await;
        candidate_o.put(None).await;
        return None;
    }
    let decision_i = Decision::new();
    candidate_i.put(Some(decision_i.clone())).await;
    let x_i = decision_i.get().await;
    let decision_o = Decision::new();
    candidate_o.put(Some(decision_o.clone())).await;
    let x_o = decision_o.get().await;
    if let Some(commit_i) = &x_i {
        commit_i.put(x_o.is_some()).await;
    }
    if let Some(commit_o) = &x_o {
        commit_o.put(x_i.is_some()).await;
    }
    Some(SessionOutcome {
        input_selected: x_i.is_some(),
        output_selected: x_o.is_some(),
    })
}

pub async fn g_channel_actor<T>(i: GIn<T>, o: GOut<T>, stats: Arc<GuardStats>) {
    loop {
        let outcome = g_channel_session(&i, &o).await;
        stats.sessions.fetch_add(1, Ordering::SeqCst);
        if outcome.is_none() {
            stats.bounces.fetch_add(1, Ordering::SeqCst);
        }
    }
}

async fn forward(s: &Synchronizer, p: &Point, decision: Decision) {
    s.put((p.clone(), decision)).await;
    p.get().await;
}

/// Registers until the channel offers a partner satisfying `cond`, then behaves
/// as an unguarded input point.
pub async fn g_point_input<T>(
    s: &Synchronizer,
    p: &Point,
    c: &GChannel<T>,
    cond: &Predicate<T>,
    act: impl Future<Output = T>,
) -> T {
    loop {
        let candidate = GCandidate::new();
        c.stats.registrations.fetch_add(1, Ordering::SeqCst);
        c.input.put((candidate.clone(), Arc::clone(cond))).await;
        if let Some(decision) = candidate.get().await {
            forward(s, p, decision).await;
            return act.await;
        }
    }
}

pub async fn g_point_output<T: Clone>(
    s: &Synchronizer,
    p: &Point,
    c: &GChannel<T>,
    m: &T,
    act: impl Future<Output = ()>,
) {
    loop {
        let candidate = GCandidate::new();
        c.stats.registrations.fetch_add(1, Ordering::SeqCst);
        c.output.put((candidate.clone(), m.clone())).await;
        if let Some(decision) = candidate.get().await {
            forward(s, p, decision).await;
            return act.await;
        }
    }
}

/// Receives a value satisfying `cond`. The predicate runs on the channel actor
/// and must be pure and terminating.
pub fn receive_if<T, F>(c: &GChannel<T>, cond: F) -> Event<T>
where
    T: Send + 'static,
    F: Fn(&T) -> bool + Send + Sync + 'static,
{
    let c = c.clone();
    let cond: Predicate<T> = Arc::new(cond);
    Event::from_fn(move |s, name, _abort| {
        let (c, cond) = (c.clone(), Arc::clone(&cond));
        async move {
            let p = Point::new();
            let published = p.clone();
            drop(tokio::spawn(async move { name.put(vec![published]).await }));
            let payload = c.payload.clone();
            g_point_input(&s, &p, &c, &cond, async move { payload.get().await }).await
        }
    })
}

pub fn receive<T: Send + 'static>(c: &GChannel<T>) -> Event<T> {
    receive_if(c, |_| true)
}

pub fn transmit<T: Clone + Send + Sync + 'static>(c: &GChannel<T>, m: T) -> Event<()> {
    let c = c.clone();
    Event::from_fn(move |s, name, _abort| {
        let (c, m) = (c.clone(), m.clone());
        async move {
            let p = Point::new();
            let published = p.clone();
            drop(tokio::spawn(async move { name.put(vec![published]).await }));
            let payload = c.payload.clone();
            let sent = m.clone();
            g_point_output(&s, &p, &c, &m, async move { payload.put(sent).await }).await
        }
    })
}
