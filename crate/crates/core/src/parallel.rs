//! Round-level execution: a rayon data-parallel map with a sequential fallback.
//!
//! Results are always collected in round order, so any reduction over them is
//! deterministic whatever the thread count.

use serde::{Deserialize, Serialize};

/// How independent rounds are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Rayon thread pool when the `parallel` feature is enabled, otherwise sequential.
    #[default]
    Parallel,
    Sequential,
}

/// Evaluates `f(0), ..., f(n-1)` and returns the values in index order.
pub fn map_rounds<T, F>(n: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Sizes the global rayon pool; a no-op without the `parallel` feature.
/// Returns false if the pool was already initialised.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        true
    }
}

/// True when rounds can run on more than one thread.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
