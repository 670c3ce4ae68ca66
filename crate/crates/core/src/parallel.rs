//! Execution of independent per-sub-area tasks.
//!
//! With the `parallel` feature and more than one worker, tasks run on a
//! dedicated rayon pool; otherwise they run in order on the calling thread.
//! Outputs are always returned in input order.

use std::fmt;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Result, SnnError};

pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers)
            .field("parallel", &self.is_parallel())
            .finish()
    }
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(SnnError::Config("worker count must be at least 1".into()));
        }
        #[cfg(feature = "parallel")]
        {
            let pool = if workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .thread_name(|i| format!("snn-worker-{i}"))
                        .build()
                        .map_err(|e| SnnError::Config(format!("cannot start worker pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(Self { workers, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            if workers > 1 {
                log::warn!("built without the `parallel` feature; running {workers} workers sequentially");
            }
            Ok(Self { workers })
        }
    }

    pub fn sequential() -> Self {
        Self {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Applies `f` to every item, possibly concurrently.
    pub fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| {
                items
                    .par_iter_mut()
                    .enumerate()
                    .map(|(i, item)| f(i, item))
                    .collect()
            });
        }
        items.iter_mut().enumerate().map(|(i, item)| f(i, item)).collect()
    }
}
