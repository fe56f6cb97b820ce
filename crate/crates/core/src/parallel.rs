//! Worker pool for batch solves. `POPA_THREADS` caps the number of threads.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const THREADS_ENV: &str = "POPA_THREADS";

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
            .unwrap_or(0);
        ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to start worker pool")
    })
}

/// Runs `f` inside the shared pool; rayon iterators in `f` use its threads.
pub fn install<R, F>(f: F) -> R
where
    F: FnOnce() -> R + Send,
    R: Send,
{
    pool().install(f)
}
