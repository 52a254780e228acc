//! Command implementations for the `cmlsync` binary.

pub mod demo;
pub mod family;
pub mod modelcheck;
pub mod workloads;
