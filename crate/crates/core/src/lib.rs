//! First-class synchronous events built from single-slot blocking cells, and
//! an executable model of the commit protocol behind them.
//!
//! * [`cell`]: the blocking single-slot cell every protocol message uses.
//! * [`events`]: channels, events, combinators and `sync`.
//! * [`guarded`]: channels whose receivers can filter messages by predicate.
//! * [`progdsl`]: the tiny `select(..) | ..` program language.
//! * [`machine`]: abstract state machine, exploration and correctness checks.

pub mod cell;
pub mod events;
pub mod guarded;
pub mod machine;
pub mod progdsl;

pub use cell::Cell;
pub use progdsl::{parse_program, Action, ChannelId, Program};
