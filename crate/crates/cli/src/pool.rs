use rayon::prelude::*;

use crate::{CliError, MAX_WORKERS_ENV};

/// Worker count after applying the environment cap (at least one).
pub fn effective_workers(requested: Option<usize>) -> usize {
    let requested = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cap = std::env::var(MAX_WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    match cap {
        Some(cap) if cap > 0 => requested.min(cap).max(1),
        _ => requested.max(1),
    }
}

/// Runs `f` over `items` on a bounded pool; results keep the input order.
pub fn run_jobs<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}
