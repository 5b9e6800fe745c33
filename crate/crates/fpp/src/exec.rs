//! Worker pool over seeds.

use std::ops::Range;

use fpp_core::exec::SeedMap;
use rayon::prelude::*;

pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(Self { pool: rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()? })
    }
}

impl SeedMap for Pool {
    /// Results come back in seed order, whatever the worker count.
    fn map_seeds<R, F>(&self, seeds: Range<u64>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        self.pool.install(|| seeds.into_par_iter().map(f).collect())
    }
}
