//! Order-preserving data-parallel map.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it every call runs sequentially. Results come back in index order
//! either way, so callers see identical output for any thread count.

/// How many workers a batch of independent jobs may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// A dedicated pool with this many threads; 0 uses rayon's default.
    Threads(usize),
}

impl Parallelism {
    /// `--jobs` semantics: 1 is sequential, 0 is "all cores".
    pub fn from_jobs(jobs: usize) -> Self {
        if jobs == 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Threads(jobs)
        }
    }
}

/// `(0..n).map(f)` collected in order, possibly in parallel.
pub fn map_indexed<T, F>(n: usize, parallelism: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    match parallelism {
        Parallelism::Sequential => (0..n).map(f).collect(),
        Parallelism::Threads(threads) => parallel_map(n, threads, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;

    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        // Pool creation only fails when the OS refuses threads.
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, _threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).map(f).collect()
}
