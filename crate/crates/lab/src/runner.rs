//! Deterministic fan-out of replications over a worker pool.

use bralev_core::rng::{derive_seed, replication_stream, RandomStream};
use rayon::prelude::*;

/// Runs replications on a fixed-size pool.
///
/// Replication `i` of stage `s` always draws from the stream
/// `(derive_seed(master, s), i)` and results come back in index order, so
/// output is independent of the worker count.
pub struct Runner {
    pool: rayon::ThreadPool,
    seed: u64,
}

impl Runner {
    pub fn new(seed: u64, workers: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()?;
        Ok(Self { pool, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(i, stream_i)` for `i in 0..n`, in order.
    pub fn map<T, E, F>(&self, stage: u64, n: u64, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(u64, &mut RandomStream) -> Result<T, E> + Sync,
    {
        let stage_seed = derive_seed(self.seed, stage);
        self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| f(i, &mut replication_stream(stage_seed, i)))
                .collect()
        })
    }
}
