//! Execution helpers: data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) the map runs on the rayon pool;
//! without it the same closure runs on one thread. Every call site maps a
//! closure over independent outputs, so the two paths produce bit-identical
//! results and differ only in wall-clock time.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f(0), f(1), ..., f(n-1)` and collect the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential variant of [`map_indexed`], available regardless of features.
/// The benchmarks use it as the single-thread baseline.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// True when the crate was built with the rayon-backed `parallel` feature.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
