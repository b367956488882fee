//! Execution strategy for independent work units (Monte-Carlo trials,
//! theorem draws, training runs).
//!
//! Every unit derives its randomness from its own index, and results are
//! collected in index order, so output never depends on the strategy or the
//! worker count. Without the `parallel` feature every strategy runs on the
//! calling thread.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Execution {
    Sequential,
    /// `workers == 0` lets rayon pick the thread count.
    Parallel { workers: usize },
    #[default]
    Auto,
}

impl Execution {
    /// Maps a `--workers` style cap onto a strategy: `1` is sequential,
    /// `0` is the rayon default.
    pub fn from_workers(workers: usize) -> Self {
        match workers {
            1 => Execution::Sequential,
            n => Execution::Parallel { workers: n },
        }
    }

    /// Applies `f` to `0..n` and returns the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Auto => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel { workers } => {
                use rayon::prelude::*;
                match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                    Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
                    Err(e) => {
                        log::warn!("thread pool unavailable ({e}); running sequentially");
                        (0..n).map(f).collect()
                    }
                }
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Auto | Execution::Parallel { .. } => (0..n).map(f).collect(),
        }
    }

    /// Like [`Execution::map`] for fallible units; the first error in index
    /// order wins.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}
