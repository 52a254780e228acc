//! First-class synchronous events.
//!
//! An [`Event`] is a suspended computation over three cells of one
//! synchronization attempt: the synchronizer inbox, the cell on which the event
//! publishes the points it encloses, and the cell on which abort actions are
//! handed to the synchronizer. [`sync`] runs attempts until one commits.
//!
//! Every principal of the protocol is a task: one per channel, one per
//! synchronizer, one per point. All messages travel through [`Cell`]s. Tasks of
//! abandoned attempts stay blocked forever and are reclaimed with the runtime.
//!
//! Functions that create channels or synchronize spawn onto the ambient tokio
//! runtime and panic outside one.

use std::future::Future;
use std::pin::Pin;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::cell::Cell;

pub type BoxFuture<T> = Pin<Box<dyn Future<Output = T> + Send + 'static>>;

/// Signalled once when the point's synchronizer confirms it.
pub type Point = Cell<()>;
/// `true` commits, `false` cancels.
pub type Commit = Cell<bool>;
/// Present when the synchronizer selected the point.
pub type Decision = Cell<Option<Commit>>;
pub type Candidate = Cell<Decision>;
pub type In = Cell<Candidate>;
pub type Out = Cell<Candidate>;
pub type Synchronizer = Cell<(Point, Decision)>;
/// Points enclosed by an event, written once and then only peeked.
pub type Name = Cell<Vec<Point>>;
pub type Abort = Cell<(Vec<Point>, BoxFuture<()>)>;

fn spawn<F: Future<Output = ()> + Send + 'static>(f: F) {
    drop(tokio::spawn(f));
}

async fn peek<T: Clone>(cell: &Cell<T>) -> T {
    let v = cell.get().await;
    cell.put(v.clone()).await;
    v
}

/// A synchronous channel carrying values of type `T`.
pub struct Channel<T> {
    pub input: In,
    pub output: Out,
    pub payload: Cell<T>,
}

impl<T> Clone for Channel<T> {
    fn clone(&self) -> Self {
        Channel {
            input: self.input.clone(),
            output: self.output.clone(),
            payload: self.payload.clone(),
        }
    }
}

impl<T: Send + 'static> Channel<T> {
    /// Fresh channel served by its own actor task.
    pub fn new() -> Self {
        let ch = Channel {
            input: Cell::new(),
            output: Cell::new(),
            payload: Cell::new(),
        };
        spawn(channel_actor(ch.input.clone(), ch.output.clone()));
        ch
    }
}

impl<T: Send + 'static> Default for Channel<T> {
    fn default() -> Self {
        Channel::new()
    }
}

/// Which candidates a channel session selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionOutcome {
    pub input_selected: bool,
    pub output_selected: bool,
}

impl SessionOutcome {
    pub fn committed(&self) -> bool {
        self.input_selected && self.output_selected
    }
}

/// One matching session: pair the next input with the next output, ask both
/// synchronizers, and tell each selected side whether its partner was selected.
pub async fn channel_session(i: &In, o: &Out) -> SessionOutcome {
    let candidate_i = i.get().await;
    let candidate_o = o.get().await;
    let decision_i = Decision::new();
    candidate_i.put(decision_i.clone()).await;
    let x_i = decision_i.get().await;
    let decision_o = Decision::new();
    candidate_o.put(decision_o.clone()).await;
    let x_o = decision_o.get().await;
    if let Some(commit_i) = &x_i {
        commit_i.put(x_o.is_some()).await;
    }
    if let Some(commit_o) = &x_o {
        commit_o.put(x_i.is_some()).await;
    }
    SessionOutcome {
        input_selected: x_i.is_some(),
        output_selected: x_o.is_some(),
    }
}

pub async fn channel_actor(i: In, o: Out) {
    loop {
        channel_session(&i, &o).await;
    }
}

async fn point(s: &Synchronizer, p: &Point, registry: &Cell<Candidate>) {
    let candidate = Candidate::new();
    registry.put(candidate.clone()).await;
    let decision = candidate.get().await;
    s.put((p.clone(), decision)).await;
    p.get().await;
}

/// Registers `p` as an input point and runs `act` once the point is confirmed.
pub async fn point_input<T>(
    s: &Synchronizer,
    p: &Point,
    i: &In,
    act: impl Future<Output = T>,
) -> T {
    point(s, p, i).await;
    act.await
}

/// Registers `p` as an output point and runs `act` once the point is confirmed.
pub async fn point_output(s: &Synchronizer, p: &Point, o: &Out, act: impl Future<Output = ()>) {
    point(s, p, o).await;
    act.await
}

/// Synchronizer for one attempt. The first point to report is offered the
/// commit; every later one is refused. On commit, abort actions of events not
/// enclosing the committed point are spawned; on cancellation `retry` runs.
pub async fn sync_actor(s: Synchronizer, abort: Abort, retry: impl Future<Output = ()>) {
    let (p, decision) = s.get().await;
    let rejector = s.clone();
    spawn(async move {
        loop {
            let (_, decision) = rejector.get().await;
            decision.put(None).await;
        }
    });
    let commit = Commit::new();
    decision.put(Some(commit.clone())).await;
    if commit.get().await {
        p.put(()).await;
        loop {
            let (points, f) = abort.get().await;
            if !points.iter().any(|q| q.ptr_eq(&p)) {
                spawn(f);
            }
        }
    } else {
        retry.await;
    }
}

/// A first-class synchronous operation yielding `T`.
pub struct Event<T> {
    run: Arc<dyn Fn(Synchronizer, Name, Abort) -> BoxFuture<T> + Send + Sync>,
}

impl<T> Clone for Event<T> {
    fn clone(&self) -> Self {
        Event {
            run: Arc::clone(&self.run),
        }
    }
}

impl<T: Send + 'static> Event<T> {
    pub fn from_fn<F, Fut>(f: F) -> Self
    where
        F: Fn(Synchronizer, Name, Abort) -> Fut + Send + Sync + 'static,
        Fut: Future<Output = T> + Send + 'static,
    {
        Event {
            run: Arc::new(move |s, name, abort| Box::pin(f(s, name, abort))),
        }
    }

    /// Runs the event as part of the attempt owning `s`.
    pub fn run(&self, s: Synchronizer, name: Name, abort: Abort) -> BoxFuture<T> {
        (self.run)(s, name, abort)
    }
}

/// Receives a value from `c`.
pub fn receive<T: Send + 'static>(c: &Channel<T>) -> Event<T> {
    let c = c.clone();
    Event::from_fn(move |s, name, _abort| {
        let c = c.clone();
        async move {
            let p = Point::new();
            let published = p.clone();
            spawn(async move { name.put(vec![published]).await });
            let payload = c.payload;
            point_input(&s, &p, &c.input, async move { payload.get().await }).await
        }
    })
}

/// Sends `m` on `c`.
pub fn transmit<T: Clone + Send + Sync + 'static>(c: &Channel<T>, m: T) -> Event<()> {
    let c = c.clone();
    Event::from_fn(move |s, name, _abort| {
        let c = c.clone();
        let m = m.clone();
        async move {
            let p = Point::new();
            let published = p.clone();
            spawn(async move { name.put(vec![published]).await });
            let payload = c.payload;
            point_output(&s, &p, &c.output, async move { payload.put(m).await }).await
        }
    })
}

/// Runs `f` at every attempt and synchronizes on the event it returns.
pub fn guard<T, F>(f: F) -> Event<T>
where
    T: Send + 'static,
    F: Fn() -> Event<T> + Send + Sync + 'static,
{
    Event::from_fn(move |s, name, abort| f().run(s, name, abort))
}

pub fn guard_async<T, F, Fut>(f: F) -> Event<T>
where
    T: Send + 'static,
    F: Fn() -> Fut + Send + Sync + 'static,
    Fut: Future<Output = Event<T>> + Send + 'static,
{
    let f = Arc::new(f);
    Event::from_fn(move |s, name, abort| {
        let f = Arc::clone(&f);
        async move { f().await.run(s, name, abort).await }
    })
}

/// Post-processes the result of `v`.
pub fn wrap<T, U, F>(v: Event<T>, f: F) -> Event<U>
where
    T: Send + 'static,
    U: Send + 'static,
    F: Fn(T) -> U + Send + Sync + 'static,
{
    let f = Arc::new(f);
    Event::from_fn(move |s, name, abort| {
        let fut = v.run(s, name, abort);
        let f = Arc::clone(&f);
        async move { f(fut.await) }
    })
}

pub fn wrap_async<T, U, F, Fut>(v: Event<T>, f: F) -> Event<U>
where
    T: Send + 'static,
    U: Send + 'static,
    F: Fn(T) -> Fut + Send + Sync + 'static,
    Fut: Future<Output = U> + Send + 'static,
{
    let f = Arc::new(f);
    Event::from_fn(move |s, name, abort| {
        let fut = v.run(s, name, abort);
        let f = Arc::clone(&f);
        async move { f(fut.await).await }
    })
}

/// Selective choice: synchronizes exactly one of `vs`.
///
/// `choose(vec![])` never synchronizes.
pub fn choose<T: Send + 'static>(vs: Vec<Event<T>>) -> Event<T> {
    let vs: Arc<[Event<T>]> = vs.into();
    Event::from_fn(move |s, name, abort| {
        let vs = Arc::clone(&vs);
        async move {
            let temp = Cell::<T>::new();
            let deposited = Arc::new(AtomicBool::new(false));
            let mut points = Vec::new();
            for v in vs.iter() {
                let branch_name = Name::new();
                let fut = v.run(s.clone(), branch_name.clone(), abort.clone());
                let temp = temp.clone();
                let deposited = Arc::clone(&deposited);
                spawn(async move {
                    let x = fut.await;
                    let first = !deposited.swap(true, Ordering::SeqCst);
                    debug_assert!(first, "two branches of one choice committed");
                    temp.put(x).await;
                });
                let mut branch_points = peek(&branch_name).await;
                branch_points.append(&mut points);
                points = branch_points;
            }
            spawn(async move { name.put(points).await });
            temp.get().await
        }
    })
}

/// Spawns `f` after synchronization if `v` was not selected.
pub fn wrapabort<T, F, Fut>(f: F, v: Event<T>) -> Event<T>
where
    T: Send + 'static,
    F: Fn() -> Fut + Send + Sync + 'static,
    Fut: Future<Output = ()> + Send + 'static,
{
    let f = Arc::new(f);
    Event::from_fn(move |s, name: Name, abort: Abort| {
        let f = Arc::clone(&f);
        let (name2, abort2) = (name.clone(), abort.clone());
        spawn(async move {
            let points = peek(&name2).await;
            let action: BoxFuture<()> = Box::pin(f());
            abort2.put((points, action)).await;
        });
        v.run(s, name, abort)
    })
}

enum Attempt<T> {
    Committed(T),
    Retry,
}

/// Synchronizes `v`, returning its value and the number of cancelled attempts.
pub async fn sync_with_retries<T: Send + 'static>(v: &Event<T>) -> (T, u32) {
    let mut retries = 0;
    loop {
        let s = Synchronizer::new();
        let name = Name::new();
        let abort = Abort::new();
        let outcome = Cell::<Attempt<T>>::new();
        let on_retry = outcome.clone();
        spawn(sync_actor(s.clone(), abort.clone(), async move {
            on_retry.put(Attempt::Retry).await;
        }));
        let fut = v.run(s, name, abort);
        let on_commit = outcome.clone();
        spawn(async move {
            let x = fut.await;
            on_commit.put(Attempt::Committed(x)).await;
        });
        match outcome.get().await {
            Attempt::Committed(x) => return (x, retries),
            Attempt::Retry => retries += 1,
        }
    }
}

/// Blocks until `v` commits and returns its value.
pub async fn sync<T: Send + 'static>(v: &Event<T>) -> T {
    sync_with_retries(v).await.0
}

pub async fn accept<T: Send + 'static>(c: &Channel<T>) -> T {
    sync(&receive(c)).await
}

pub async fn send<T: Clone + Send + Sync + 'static>(c: &Channel<T>, m: T) {
    sync(&transmit(c, m)).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;
    use std::sync::Mutex;
    use std::time::Duration;
    use tokio::time::timeout;

    const LIMIT: Duration = Duration::from_secs(5);

    async fn within<T>(f: impl Future<Output = T>) -> T {
        timeout(LIMIT, f).await.expect("timed out")
    }

    #[tokio::test]
    async fn send_and_accept_rendezvous() {
        let c = Channel::new();
        let c2 = c.clone();
        tokio::spawn(async move { send(&c2, 7).await });
        assert_eq!(within(accept(&c)).await, 7);
    }

    #[tokio::test]
    async fn channels_are_independent() {
        let (a, b) = (Channel::<u8>::new(), Channel::<u8>::new());
        let a2 = a.clone();
        tokio::spawn(async move { send(&a2, 1).await });
        assert!(timeout(Duration::from_millis(50), accept(&b))
            .await
            .is_err());
        assert_eq!(within(accept(&a)).await, 1);
    }

    #[tokio::test]
    async fn accept_alone_blocks() {
        let c = Channel::<u8>::new();
        assert!(timeout(Duration::from_millis(50), accept(&c))
            .await
            .is_err());
    }

    #[tokio::test]
    async fn session_commits_both_sides() {
        let (i, o) = (In::new(), Out::new());
        let (ci, co) = (Candidate::new(), Candidate::new());
        i.put(ci.clone()).await;
        o.put(co.clone()).await;
        let session = tokio::spawn({
            let (i, o) = (i.clone(), o.clone());
            async move { channel_session(&i, &o).await }
        });
        let (commit_i, commit_o) = (Commit::new(), Commit::new());
        ci.get().await.put(Some(commit_i.clone())).await;
        co.get().await.put(Some(commit_o.clone())).await;
        assert!(commit_i.get().await);
        assert!(commit_o.get().await);
        assert!(session.await.unwrap().committed());
    }

    #[tokio::test]
    async fn session_cancels_selected_side_when_partner_refused() {
        let (i, o) = (In::new(), Out::new());
        let (ci, co) = (Candidate::new(), Candidate::new());
        i.put(ci.clone()).await;
        o.put(co.clone()).await;
        let session = tokio::spawn({
            let (i, o) = (i.clone(), o.clone());
            async move { channel_session(&i, &o).await }
        });
        let commit_i = Commit::new();
        ci.get().await.put(Some(commit_i.clone())).await;
        co.get().await.put(None).await;
        assert!(!commit_i.get().await);
        let outcome = session.await.unwrap();
        assert!(outcome.input_selected && !outcome.output_selected);
    }

    #[tokio::test]
    async fn session_with_two_refusals_sends_no_signal() {
        let (i, o) = (In::new(), Out::new());
        let (ci, co) = (Candidate::new(), Candidate::new());
        i.put(ci.clone()).await;
        o.put(co.clone()).await;
        let session = tokio::spawn({
            let (i, o) = (i.clone(), o.clone());
            async move { channel_session(&i, &o).await }
        });
        ci.get().await.put(None).await;
        co.get().await.put(None).await;
        let outcome = within(session).await.unwrap();
        assert!(!outcome.input_selected && !outcome.output_selected);
    }

    #[tokio::test]
    async fn synchronizer_selects_first_and_refuses_later() {
        let (s, abort) = (Synchronizer::new(), Abort::new());
        let retried = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&retried);
        tokio::spawn(sync_actor(s.clone(), abort, async move {
            flag.store(true, Ordering::SeqCst)
        }));
        let (p, q) = (Point::new(), Point::new());
        let (dp, dq) = (Decision::new(), Decision::new());
        s.put((p.clone(), dp.clone())).await;
        s.put((q.clone(), dq.clone())).await;
        let commit = within(dp.get())
            .await
            .expect("first point is offered the commit");
        assert!(within(dq.get()).await.is_none());
        commit.put(true).await;
        within(p.get()).await;
        assert!(!retried.load(Ordering::SeqCst));
    }

    #[tokio::test]
    async fn cancelled_commit_runs_retry_once() {
        let (s, abort) = (Synchronizer::new(), Abort::new());
        let retries = Arc::new(AtomicUsize::new(0));
        let count = Arc::clone(&retries);
        let actor = tokio::spawn(sync_actor(s.clone(), abort, async move {
            count.fetch_add(1, Ordering::SeqCst);
        }));
        let (p, dp) = (Point::new(), Decision::new());
        s.put((p.clone(), dp.clone())).await;
        dp.get().await.unwrap().put(false).await;
        within(actor).await.unwrap();
        assert_eq!(retries.load(Ordering::SeqCst), 1);
        assert!(timeout(Duration::from_millis(20), p.get()).await.is_err());
    }

    #[tokio::test]
    async fn abort_enclosing_commit_point_is_skipped() {
        let (s, abort) = (Synchronizer::new(), Abort::new());
        tokio::spawn(sync_actor(s.clone(), abort.clone(), async {}));
        let (p, dp) = (Point::new(), Decision::new());
        s.put((p.clone(), dp.clone())).await;
        dp.get().await.unwrap().put(true).await;
        p.get().await;
        let ran = Arc::new(AtomicUsize::new(0));
        for (points, expect) in [(vec![p.clone()], 0), (vec![Point::new()], 1)] {
            let ran2 = Arc::clone(&ran);
            abort
                .put((
                    points,
                    Box::pin(async move {
                        ran2.fetch_add(1, Ordering::SeqCst);
                    }),
                ))
                .await;
            tokio::time::sleep(Duration::from_millis(10)).await;
            assert_eq!(ran.load(Ordering::SeqCst), expect);
        }
    }

    #[tokio::test]
    async fn receive_names_a_single_point() {
        let c = Channel::<u8>::new();
        let (s, name, abort) = (Synchronizer::new(), Name::new(), Abort::new());
        tokio::spawn(receive(&c).run(s, name.clone(), abort));
        assert_eq!(within(peek(&name)).await.len(), 1);
        assert_eq!(within(peek(&name)).await.len(), 1);
    }

    #[tokio::test]
    async fn choose_names_the_union_of_its_branches() {
        let c = Channel::<u8>::new();
        let ev = choose(vec![receive(&c), receive(&c), choose(vec![receive(&c)])]);
        let (s, name, abort) = (Synchronizer::new(), Name::new(), Abort::new());
        tokio::spawn(ev.run(s, name.clone(), abort));
        let points = within(peek(&name)).await;
        assert_eq!(points.len(), 3);
        assert!(!points[0].ptr_eq(&points[1]));
    }

    #[tokio::test]
    async fn singleton_choice_is_transparent() {
        let c = Channel::new();
        let c2 = c.clone();
        tokio::spawn(async move { sync(&choose(vec![transmit(&c2, 1)])).await });
        assert_eq!(within(accept(&c)).await, 1);
    }

    #[tokio::test]
    async fn choose_commits_the_branch_with_a_partner() {
        let (c, d) = (Channel::<u32>::new(), Channel::<u32>::new());
        let d2 = d.clone();
        tokio::spawn(async move { send(&d2, 5).await });
        let ev = choose(vec![
            wrap(receive(&c), |x| ('c', x)),
            wrap(receive(&d), |x| ('d', x)),
        ]);
        assert_eq!(within(sync(&ev)).await, ('d', 5));
        assert!(!c.payload.is_full());
    }

    #[tokio::test]
    async fn wrap_composes_in_order() {
        let c = Channel::new();
        let c2 = c.clone();
        tokio::spawn(async move { send(&c2, 2).await });
        let ev = wrap(wrap(receive(&c), |x: i32| x + 1), |x| x * 10);
        assert_eq!(within(sync(&ev)).await, 30);
    }

    #[tokio::test]
    async fn wrap_on_transmit_replaces_result() {
        let c = Channel::<u8>::new();
        let c2 = c.clone();
        tokio::spawn(async move { accept(&c2).await });
        assert_eq!(within(sync(&wrap(transmit(&c, 1), |()| 9))).await, 9);
    }

    #[tokio::test]
    async fn guard_returning_transmit_behaves_as_transmit() {
        let c = Channel::new();
        let c2 = c.clone();
        let ev = guard(move || transmit(&c2, 4));
        tokio::spawn(async move { sync(&ev).await });
        assert_eq!(within(accept(&c)).await, 4);
    }

    #[tokio::test]
    async fn symmetric_choose_pair_completes() {
        use rand::Rng;
        let c = Channel::<u8>::new();
        // Random yields and branch order per attempt break lockstep self-matching.
        let both = |c: &Channel<u8>, tag: u8| {
            let c = c.clone();
            guard_async(move || {
                let c = c.clone();
                async move {
                    let (yields, flip) = {
                        let mut rng = rand::rng();
                        (rng.random_range(0..4), rng.random_bool(0.5))
                    };
                    for _ in 0..yields {
                        tokio::task::yield_now().await;
                    }
                    let mut branches =
                        vec![wrap(transmit(&c, tag), |()| None), wrap(receive(&c), Some)];
                    if flip {
                        branches.reverse();
                    }
                    choose(branches)
                }
            })
        };
        for _ in 0..20 {
            let (ea, eb) = (both(&c, 1), both(&c, 2));
            let a = tokio::spawn(async move { sync(&ea).await });
            let b = tokio::spawn(async move { sync(&eb).await });
            match (within(a).await.unwrap(), within(b).await.unwrap()) {
                (None, Some(1)) | (Some(2), None) => {}
                other => panic!("unexpected outcome {other:?}"),
            }
        }
    }

    #[tokio::test]
    async fn wrapabort_runs_for_losing_branch_only() {
        let (c, d) = (Channel::<u8>::new(), Channel::<u8>::new());
        let log = Arc::new(Mutex::new(Vec::new()));
        let (l1, l2) = (Arc::clone(&log), Arc::clone(&log));
        let ev = choose(vec![
            wrapabort(
                move || {
                    let l = Arc::clone(&l1);
                    async move { l.lock().unwrap().push('c') }
                },
                receive(&c),
            ),
            wrapabort(
                move || {
                    let l = Arc::clone(&l2);
                    async move { l.lock().unwrap().push('d') }
                },
                receive(&d),
            ),
        ]);
        let c2 = c.clone();
        tokio::spawn(async move { send(&c2, 1).await });
        assert_eq!(within(sync(&ev)).await, 1);
        tokio::time::sleep(Duration::from_millis(20)).await;
        assert_eq!(*log.lock().unwrap(), vec!['d']);
    }

    #[tokio::test]
    async fn no_abort_without_commit() {
        let c = Channel::<u8>::new();
        let ran = Arc::new(AtomicBool::new(false));
        let r = Arc::clone(&ran);
        let ev = choose(vec![
            receive(&c),
            wrapabort(
                move || {
                    let r = Arc::clone(&r);
                    async move { r.store(true, Ordering::SeqCst) }
                },
                receive(&c),
            ),
        ]);
        assert!(timeout(Duration::from_millis(50), sync(&ev)).await.is_err());
        assert!(!ran.load(Ordering::SeqCst));
    }

    #[tokio::test]
    async fn guard_reruns_on_every_attempt() {
        // A choice of both directions on one channel can match against itself,
        // which cancels the attempt and forces a retry.
        let c = Channel::<u8>::new();
        let runs = Arc::new(AtomicUsize::new(0));
        let (c2, r2) = (c.clone(), Arc::clone(&runs));
        let ev = guard(move || {
            r2.fetch_add(1, Ordering::SeqCst);
            choose(vec![transmit(&c2, 1), wrap(receive(&c2), |_| ())])
        });
        let task = tokio::spawn(async move { sync_with_retries(&ev).await });
        while runs.load(Ordering::SeqCst) < 3 {
            tokio::task::yield_now().await;
        }
        within(accept(&c)).await;
        let ((), retries) = within(task).await.unwrap();
        assert!(retries >= 2);
        assert_eq!(runs.load(Ordering::SeqCst), 1 + retries as usize);
    }
}
