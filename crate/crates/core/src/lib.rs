//! Exciton transfer on molecular networks with independent local phonon baths,
//! simulated with a second-order time-local master equation in a variationally
//! optimized polaron frame. Weak-coupling and full-polaron equations are the
//! limits F = 0 and F = 1 of the same machinery.

pub mod error;
pub mod model;
pub mod varopt;
pub mod corr;
pub mod dynamics;
pub mod oracle;
pub mod cli;

pub use error::{Error, Result};
