//! Indexed data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it every [`Parallelism`] setting runs on the calling thread.
//! Output is always in index order.

use std::num::NonZeroUsize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    Threads(NonZeroUsize),
    /// rayon's global pool.
    #[default]
    Auto,
}

impl Parallelism {
    /// `Some(1)` maps to [`Parallelism::Sequential`], `None` to
    /// [`Parallelism::Auto`].
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers.and_then(NonZeroUsize::new) {
            None => Parallelism::Auto,
            Some(n) if n.get() == 1 => Parallelism::Sequential,
            Some(n) => Parallelism::Threads(n),
        }
    }
}

pub fn map_indexed<T, F>(n: u64, parallelism: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Send + Sync,
{
    match parallelism {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Auto => par::map(n, &f),
        #[cfg(feature = "parallel")]
        Parallelism::Threads(k) => {
            match rayon::ThreadPoolBuilder::new().num_threads(k.get()).build() {
                Ok(pool) => pool.install(|| par::map(n, &f)),
                Err(_) => (0..n).map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(feature = "parallel")]
mod par {
    use rayon::prelude::*;

    pub(super) fn map<T, F>(n: u64, f: &F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Send + Sync,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
