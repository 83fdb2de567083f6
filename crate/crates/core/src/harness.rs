//! Trial scheduling. Trials are pure functions of their index; results come
//! back sorted by index whatever the thread count.

use rayon::prelude::*;

use crate::error::{invalid, Result};

pub fn run_trials<T, F>(trials: u64, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).into_par_iter().map(trial).collect()
}

/// Runs `op` inside a dedicated pool of `threads` workers (`None` uses the
/// global pool).
pub fn with_threads<R, F>(threads: Option<usize>, op: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        None => Ok(op()),
        Some(0) => Err(invalid("thread count must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(op))
        }
    }
}
