//! Execution-mode switch between the sequential fallback and the rayon path.
//!
//! Every data-parallel loop in the crate funnels through the two helpers
//! below. Work is always partitioned into disjoint output regions with a
//! fixed reduction order inside each region, so serial and parallel runs
//! produce bitwise-identical results; the switch only changes wall time.
//! Without the `parallel` feature, [`Exec::Parallel`] degrades to the
//! sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Serial,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Serial
        }
    }
}

/// Maps `f` over `0..n` and collects results in index order.
pub fn map_collect<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Serial => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        Exec::Parallel => (0..n).map(f).collect(),
    }
}

/// Applies `f(chunk_index, chunk)` over disjoint `chunk`-sized pieces of `data`.
pub fn for_each_chunk_mut<T, F>(exec: Exec, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0, "chunk size must be positive");
    match exec {
        Exec::Serial => data
            .chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
        #[cfg(feature = "parallel")]
        Exec::Parallel => data
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
        #[cfg(not(feature = "parallel"))]
        Exec::Parallel => data
            .chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
    }
}
