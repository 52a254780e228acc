//! Single-slot blocking cell.
//!
//! A [`Cell`] holds at most one value. [`Cell::put`] suspends the calling task
//! while the slot is full and [`Cell::get`] suspends while it is empty. Every
//! value put is taken by exactly one get. Blocked putters and blocked getters
//! are each served in FIFO order.
//!
//! Cells are runtime agnostic: the futures returned by `put` and `get` only rely
//! on wakers, so they can be driven by any executor. [`Cell::get_timeout`] needs a
//! tokio time driver.

use std::collections::VecDeque;
use std::fmt;
use std::future::Future;
use std::pin::Pin;
use std::sync::{Arc, Mutex, MutexGuard};
use std::task::{Context, Poll, Waker};
use std::time::Duration;

/// A single-slot communication cell with put/get rendezvous semantics.
///
/// Cloning a `Cell` yields another handle to the same slot.
pub struct Cell<T> {
    shared: Arc<Mutex<Slot<T>>>,
}

struct Slot<T> {
    value: Option<T>,
    getters: VecDeque<Waiter>,
    putters: VecDeque<Waiter>,
    next_ticket: u64,
}

struct Waiter {
    ticket: u64,
    waker: Waker,
}

impl<T> Slot<T> {
    fn ticket(&mut self) -> u64 {
        let t = self.next_ticket;
        self.next_ticket += 1;
        t
    }
}

fn front_waker(queue: &VecDeque<Waiter>) -> Option<Waker> {
    queue.front().map(|w| w.waker.clone())
}

fn refresh(queue: &mut VecDeque<Waiter>, ticket: u64, waker: &Waker) {
    if let Some(w) = queue.iter_mut().find(|w| w.ticket == ticket) {
        if !w.waker.will_wake(waker) {
            w.waker = waker.clone();
        }
    }
}

/// Removes `ticket` from `queue`; returns the waker of the new front waiter if
/// the removed waiter was at the front.
fn withdraw(queue: &mut VecDeque<Waiter>, ticket: u64) -> Option<Waker> {
    let pos = queue.iter().position(|w| w.ticket == ticket)?;
    queue.remove(pos);
    if pos == 0 {
        front_waker(queue)
    } else {
        None
    }
}

impl<T> Cell<T> {
    /// Returns a fresh, empty cell.
    pub fn new() -> Self {
        Cell {
            shared: Arc::new(Mutex::new(Slot {
                value: None,
                getters: VecDeque::new(),
                putters: VecDeque::new(),
                next_ticket: 0,
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Slot<T>> {
        self.shared.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Deposits `value` once the slot is empty and every earlier putter has
    /// been served.
    pub fn put(&self, value: T) -> Put<'_, T> {
        Put {
            cell: self,
            value: Some(value),
            ticket: None,
        }
    }

    /// Takes the slot value once one is present and every earlier getter has
    /// been served, leaving the slot empty.
    pub fn get(&self) -> Get<'_, T> {
        Get {
            cell: self,
            ticket: None,
        }
    }

    /// Like [`Cell::get`], but gives up after `timeout`. A `None` result has
    /// not consumed anything.
    ///
    /// Must be called from within a tokio runtime with the time driver enabled.
    pub async fn get_timeout(&self, timeout: Duration) -> Option<T> {
        tokio::time::timeout(timeout, self.get()).await.ok()
    }

    /// Whether two handles refer to the same cell.
    pub fn ptr_eq(&self, other: &Cell<T>) -> bool {
        Arc::ptr_eq(&self.shared, &other.shared)
    }

    /// Racy snapshot of whether the slot is occupied. Diagnostics only.
    pub fn is_full(&self) -> bool {
        self.lock().value.is_some()
    }
}

impl<T> Clone for Cell<T> {
    fn clone(&self) -> Self {
        Cell {
            shared: Arc::clone(&self.shared),
        }
    }
}

impl<T> Default for Cell<T> {
    fn default() -> Self {
        Cell::new()
    }
}

impl<T> PartialEq for Cell<T> {
    fn eq(&self, other: &Self) -> bool {
        self.ptr_eq(other)
    }
}

impl<T> Eq for Cell<T> {}

impl<T> fmt::Debug for Cell<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slot = self.lock();
        f.debug_struct("Cell")
            .field("id", &Arc::as_ptr(&self.shared))
            .field("full", &slot.value.is_some())
            .field("getters", &slot.getters.len())
            .field("putters", &slot.putters.len())
            .finish()
    }
}

/// Future returned by [`Cell::put`].
#[must_use = "futures do nothing unless polled"]
pub struct Put<'a, T> {
    cell: &'a Cell<T>,
    value: Option<T>,
    ticket: Option<u64>,
}

// The value is moved out, never pinned in place.
impl<T> Unpin for Put<'_, T> {}

impl<T> Future for Put<'_, T> {
    type Output = ();

    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<()> {
        let this = self.get_mut();
        let mut slot = this.cell.lock();
        let my_turn = match this.ticket {
            None => slot.putters.is_empty(),
            Some(t) => slot.putters.front().map(|w| w.ticket) == Some(t),
        };
        if my_turn && slot.value.is_none() {
            if this.ticket.take().is_some() {
                slot.putters.pop_front();
            }
            slot.value = this.value.take();
            let wake = front_waker(&slot.getters);
            drop(slot);
            if let Some(w) = wake {
                w.wake();
            }
            return Poll::Ready(());
        }
        match this.ticket {
            None => {
                let ticket = slot.ticket();
                slot.putters.push_back(Waiter {
                    ticket,
                    waker: cx.waker().clone(),
                });
                this.ticket = Some(ticket);
            }
            Some(t) => refresh(&mut slot.putters, t, cx.waker()),
        }
        Poll::Pending
    }
}

impl<T> Drop for Put<'_, T> {
    fn drop(&mut self) {
        if let Some(t) = self.ticket.take() {
            let wake = withdraw(&mut self.cell.lock().putters, t);
            if let Some(w) = wake {
                w.wake();
            }
        }
    }
}

/// Future returned by [`Cell::get`].
#[must_use = "futures do nothing unless polled"]
pub struct Get<'a, T> {
    cell: &'a Cell<T>,
    ticket: Option<u64>,
}

impl<T> Future for Get<'_, T> {
    type Output = T;

    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<T> {
        let this = self.get_mut();
        let mut slot = this.cell.lock();
        let my_turn = match this.ticket {
            None => slot.getters.is_empty(),
            Some(t) => slot.getters.front().map(|w| w.ticket) == Some(t),
        };
        if my_turn {
            if let Some(value) = slot.value.take() {
                if this.ticket.take().is_some() {
                    slot.getters.pop_front();
                }
                let wake = front_waker(&slot.putters);
                drop(slot);
                if let Some(w) = wake {
                    w.wake();
                }
                return Poll::Ready(value);
            }
        }
        match this.ticket {
            None => {
                let ticket = slot.ticket();
                slot.getters.push_back(Waiter {
                    ticket,
                    waker: cx.waker().clone(),
                });
                this.ticket = Some(ticket);
            }
            Some(t) => refresh(&mut slot.getters, t, cx.waker()),
        }
        Poll::Pending
    }
}

impl<T> Drop for Get<'_, T> {
    fn drop(&mut self) {
        if let Some(t) = self.ticket.take() {
            let wake = withdraw(&mut self.cell.lock().getters, t);
            if let Some(w) = wake {
                w.wake();
            }
        }
    }
}
