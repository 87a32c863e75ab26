//! Work-item executor.
//!
//! Every experiment is a list of independent items whose results land in
//! slots indexed by item number, so the output never depends on how items
//! were scheduled.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Executor {
    Sequential,
    /// `workers = 0` uses rayon's global pool.
    Parallel { workers: usize },
}

impl Default for Executor {
    fn default() -> Self {
        Executor::Parallel { workers: 0 }
    }
}

impl Executor {
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            Executor::Sequential
        } else {
            Executor::Parallel { workers }
        }
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Executor::Sequential => (0..n).map(f).collect(),
            Executor::Parallel { workers } => parallel_map(n, workers, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    if workers == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => (0..n).map(&f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, _workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_index_order() {
        let f = |i: usize| i * i;
        let seq = Executor::Sequential.map(100, f);
        for w in [0, 2, 8] {
            assert_eq!(Executor::Parallel { workers: w }.map(100, f), seq);
        }
        assert!(Executor::Sequential.map(0, f).is_empty());
    }
}
