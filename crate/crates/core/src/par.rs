//! Data-parallel helpers.
//!
//! Every helper returns results in index order, so reductions performed by
//! the caller are independent of the number of workers. With the `parallel`
//! feature disabled the same functions run sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Evaluates `f(0..n)` and returns the results in index order.
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

/// Like [`map_indexed`], but fails with the lowest-index error.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Number of worker threads the parallel helpers will use.
pub fn workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Fixes the global worker count; call once before any parallel work.
/// Ignored without the `parallel` feature.
pub fn init_workers(n: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| crate::error::Error::Usage(format!("cannot size the worker pool: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Running Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
