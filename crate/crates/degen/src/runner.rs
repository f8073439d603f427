use degen_core::{ShardRunner, ShardTally};
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// Runs shards on a dedicated rayon pool. Tallies come back in shard order,
/// so estimates depend on the shard count but not on the thread count.
pub struct RayonRunner {
    pool: ThreadPool,
}

impl RayonRunner {
    /// `threads = None` uses one worker per available core.
    pub fn new(threads: Option<usize>) -> Result<Self, ThreadPoolBuildError> {
        let mut builder = ThreadPoolBuilder::new();
        if let Some(k) = threads {
            builder = builder.num_threads(k);
        }
        Ok(RayonRunner { pool: builder.build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl ShardRunner for RayonRunner {
    fn run_shards(&self, shards: usize, job: &(dyn Fn(usize) -> ShardTally + Sync)) -> Vec<ShardTally> {
        self.pool.install(|| (0..shards).into_par_iter().map(job).collect())
    }
}
