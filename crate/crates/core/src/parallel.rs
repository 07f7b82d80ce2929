//! Order-preserving parallel map for trajectory ensembles.
//!
//! `SMALLGAIN_THREADS` caps the worker count; `0` runs sequentially. Results
//! are identical either way because every item is computed independently.

use rayon::prelude::*;

pub const THREADS_ENV: &str = "SMALLGAIN_THREADS";

/// Worker cap from the environment: `Some(0)` means sequential.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())
}

pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    par_map_with(thread_limit(), items, f)
}

/// Like [`par_map`] with an explicit worker cap instead of the environment.
pub fn par_map_with<T, R, F>(limit: Option<usize>, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match limit {
        Some(0) => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()),
            Err(_) => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
        },
        None => items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect(),
    }
}
