//! Restoration planning for disaster-damaged distribution feeders.
//!
//! The crate sizes a fleet of mobile generators, storage and PV ahead of an
//! event, contracts the damaged feeder into islands, and co-optimizes
//! resource placement, crew routing and dispatch with a mixed-integer conic
//! model solved by branch-and-bound. It is `no_std` with `alloc`; file
//! formats, the CLI and the interior-point backend live in the `distres`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chr;
pub mod error;
mod math;
pub mod netmodel;
pub mod oracle;
pub mod postdisaster;
pub mod predisaster;
pub mod solver;
pub mod supernode;

pub use error::{Error, Result};
