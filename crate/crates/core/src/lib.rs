//! Numerical core for occupation-time laws of infinite measure preserving
//! systems.
//!
//! The crate is `no_std` (with `alloc`). IO, parallel scheduling and the
//! command line live in the `occtime` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chains;
pub mod distributions;
pub mod error;
pub mod maps;
pub mod orbit;
pub mod regvar;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
