use cwflow_core::Executor;
use rayon::prelude::*;

use crate::error::CliError;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "CWFLOW_THREADS";

/// Executor backed by a private rayon pool. Results come back in item order,
/// so the thread count never changes outputs.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `threads = 0` means one worker per core.
    pub fn new(threads: usize) -> Result<Self, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {threads} threads: {e}")))?;
        Ok(Pool { pool })
    }

    /// Thread count from the flag, then the environment, then the core count.
    pub fn resolve(flag: Option<usize>) -> Result<Self, CliError> {
        let n = match flag {
            Some(n) => n,
            None => match std::env::var(THREADS_ENV) {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("{THREADS_ENV}={s:?} is not a thread count")))?,
                Err(_) => 0,
            },
        };
        Self::new(n)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }
}
