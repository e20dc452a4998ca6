//! Group selection for generative sampling.
//!
//! Picks `k` candidates out of a pool of `m` so that the chosen group is both
//! individually strong (unary scores) and mutually diverse (pairwise scores),
//! by solving a cardinality-constrained quadratic binary program. The
//! [`engine`] interleaves that selection with an iterative generator and
//! prunes the pool geometrically, so only the survivors are carried to the
//! end of the trajectory.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the experiment harness live in the `groupinf` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod engine;
pub mod qip;
pub mod schedule;
pub mod scores;
pub mod toygen;

pub use error::{Error, Result};
pub use qip::{ScoreSet, Selection, SelectionProblem, SolverConfig, Strategy};
pub use schedule::PruneSchedule;
