//! Data-parallel driver with a sequential fallback.
//!
//! Monte Carlo batches (simulation trials, attack trials, game plays) are
//! independent by construction: every trial derives its own seed from the
//! trial index. `map_indexed` fans the work out over rayon when the
//! `parallel` feature (default) is on. `map_indexed_seq` is always compiled —
//! the benchmark suite uses it to measure the parallel speedup within a
//! single build — and both produce results in index order, so output is
//! identical either way.

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is enabled.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sequential reference implementation of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
