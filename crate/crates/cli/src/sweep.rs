//! Multi-seed sweeps: independent runs in parallel, capped by
//! `POLICY_DYN_THREADS`.

use rayon::prelude::*;

/// Thread cap from the environment, defaulting to the available parallelism.
pub fn sweep_threads() -> usize {
    std::env::var("POLICY_DYN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Maps `f` over the seeds in parallel, preserving order.
pub fn run_sweep<R, F>(seeds: &[u64], f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads())
        .build()
        .expect("thread pool");
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}
