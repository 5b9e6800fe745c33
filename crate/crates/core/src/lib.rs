//! Directed first-passage percolation on `Z^{d+1}` with nearest-neighbour
//! time-directed bonds.
//!
//! The crate is `no_std` with `alloc`. Sampling, exact passage times,
//! geodesics, scaling estimators and coarse-graining diagnostics live here;
//! file formats and the command line live in the `fpp` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod field;
pub mod engine;
pub mod lattice;
pub mod law;
pub mod exec;
pub mod nearly_gamma;
pub mod scaling;
pub mod skeleton;
pub mod special;

pub use lattice::{Bond, LatticeError, LatticePath, PathError, PathErrorKind, PathMap, Sign, Site, Step};
pub use law::{sample, LawError, PassageLaw};
