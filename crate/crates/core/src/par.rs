//! Data-parallel helpers. With the `parallel` feature (default) work is
//! spread over rayon threads; without it every helper runs sequentially and
//! produces the same results in the same order.

/// Maps `f` over `items` using at most `workers` threads. Output order
/// matches input order regardless of scheduling.
pub fn map_with_workers<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers > 1 && items.len() > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Maps over `0..n` on the global pool.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Number of threads the global pool would use.
pub fn available_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
