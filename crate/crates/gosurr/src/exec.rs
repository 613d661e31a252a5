//! Thread-pool executor.

use gosurr_core::exec::Executor;
use rayon::prelude::*;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "UQ_THREADS";

/// Runs batches on a private rayon pool; results keep input order.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n.max(1));
        }
        Ok(Parallel { pool: b.build()? })
    }

    /// Pool sized by `UQ_THREADS` (all cores when unset or unparsable).
    pub fn from_env() -> Result<Self, rayon::ThreadPoolBuildError> {
        Self::new(threads_from_env())
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_VAR).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

impl Executor for Parallel {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        if items.len() <= 1 {
            return items.into_iter().map(f).collect();
        }
        self.pool.install(|| items.into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let p = Parallel::new(Some(3)).unwrap();
        assert_eq!(p.threads(), 3);
        let out = p.map((0..1000).collect(), |i: u64| i * i);
        assert_eq!(out, (0..1000).map(|i| i * i).collect::<Vec<_>>());
    }
}
