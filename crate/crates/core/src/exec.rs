//! Execution of independent per-seed work.

use alloc::vec::Vec;
use core::ops::Range;

/// Maps a function over a range of seeds, returning results in seed order.
///
/// Implementations may run the calls concurrently but must not change the
/// order of the output, so downstream reductions stay bit-stable.
pub trait SeedMap {
    fn map_seeds<R, F>(&self, seeds: Range<u64>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send;
}

/// Runs every seed on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl SeedMap for Sequential {
    fn map_seeds<R, F>(&self, seeds: Range<u64>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        seeds.map(f).collect()
    }
}
