//! Execution strategy for the data-parallel inner loops.
//!
//! Every hot loop in the crate (per-point projection, nearest-neighbor
//! queries, neighborhood PCA, per-stratum selection) goes through the helpers
//! in this module. With the `parallel` feature enabled they dispatch to rayon;
//! without it, or when [`Execution::Sequential`] is requested, they run on the
//! calling thread. Both paths produce identical output: maps preserve input
//! order and reductions use a fixed chunking that does not depend on the
//! thread schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for order-stable floating point reductions.
pub const REDUCE_CHUNK: usize = 4096;

/// How a data-parallel loop should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Run on the calling thread.
    Sequential,
    /// Run on the rayon pool. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    /// True when this strategy will actually use more than the calling thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_slice<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<U, F>(exec: Execution, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Unstable sort.
pub fn sort_unstable<T: Ord + Send>(exec: Execution, v: &mut [T]) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        v.par_sort_unstable();
        return;
    }
    let _ = exec;
    v.sort_unstable();
}

/// Sums `values` in fixed chunks of [`REDUCE_CHUNK`], then sums the partials
/// left to right. The result is bit-identical for both strategies.
pub fn chunked_sum(exec: Execution, values: &[f64]) -> f64 {
    let partials: Vec<f64> = {
        #[cfg(feature = "parallel")]
        {
            if exec.is_parallel() {
                values
                    .par_chunks(REDUCE_CHUNK)
                    .map(|c| c.iter().sum::<f64>())
                    .collect()
            } else {
                values
                    .chunks(REDUCE_CHUNK)
                    .map(|c| c.iter().sum::<f64>())
                    .collect()
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = exec;
            values
                .chunks(REDUCE_CHUNK)
                .map(|c| c.iter().sum::<f64>())
                .collect()
        }
    };
    partials.iter().sum()
}

/// Maximum of `values`; `None` when empty. NaN entries are ignored.
pub fn max(exec: Execution, values: &[f64]) -> Option<f64> {
    let fold = |acc: Option<f64>, v: f64| {
        if v.is_nan() {
            acc
        } else {
            Some(acc.map_or(v, |a: f64| a.max(v)))
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return values
            .par_iter()
            .fold(|| None, |acc, &v| fold(acc, v))
            .reduce(
                || None,
                |a, b| match (a, b) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, None) => x,
                    (None, y) => y,
                },
            );
    }
    let _ = exec;
    values.iter().fold(None, |acc, &v| fold(acc, v))
}
