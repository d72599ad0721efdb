//! Data-parallel batch execution with a sequential fallback.
//!
//! With the `parallel` feature enabled (the default), batches run on rayon;
//! without it they run on the calling thread. Batch results must be merged
//! with an exactly associative and commutative operation (integer counters,
//! histograms) so that the outcome is bit-identical for every worker count
//! and for the sequential fallback.

/// Runs `work` for every index in `0..n` and merges the results.
///
/// `merge` must be associative and commutative in the exact (not just
/// mathematical) sense; all accumulators in this crate are integer-valued
/// for that reason.
#[cfg(feature = "parallel")]
pub fn batch_map_reduce<T, I, W, M>(n: u64, identity: I, work: W, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    W: Fn(u64) -> T + Sync,
    M: Fn(T, T) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(&work).reduce(&identity, &merge)
}

#[cfg(not(feature = "parallel"))]
pub fn batch_map_reduce<T, I, W, M>(n: u64, identity: I, work: W, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    W: Fn(u64) -> T + Sync,
    M: Fn(T, T) -> T + Sync + Send,
{
    batch_map_reduce_seq(n, identity, work, merge)
}

/// Sequential twin of [`batch_map_reduce`]; always available so callers can
/// cross-check and benchmark the parallel path against it.
pub fn batch_map_reduce_seq<T, I, W, M>(n: u64, identity: I, work: W, merge: M) -> T
where
    I: Fn() -> T,
    W: Fn(u64) -> T,
    M: Fn(T, T) -> T,
{
    (0..n).map(work).fold(identity(), merge)
}

/// Folds every index in `0..n` into per-worker accumulators created by
/// `identity`, then merges them. Same exactness contract as
/// [`batch_map_reduce`].
#[cfg(feature = "parallel")]
pub fn batch_fold_reduce<T, I, F, M>(n: u64, identity: I, fold: F, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(T, u64) -> T + Sync,
    M: Fn(T, T) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .fold(&identity, &fold)
        .reduce(&identity, &merge)
}

#[cfg(not(feature = "parallel"))]
pub fn batch_fold_reduce<T, I, F, M>(n: u64, identity: I, fold: F, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(T, u64) -> T + Sync,
    M: Fn(T, T) -> T + Sync + Send,
{
    batch_fold_reduce_seq(n, identity, fold, merge)
}

/// Sequential twin of [`batch_fold_reduce`].
pub fn batch_fold_reduce_seq<T, I, F, M>(n: u64, identity: I, fold: F, _merge: M) -> T
where
    I: Fn() -> T,
    F: Fn(T, u64) -> T,
    M: Fn(T, T) -> T,
{
    (0..n).fold(identity(), fold)
}

/// Runs `f` on a pool of `workers` threads when the `parallel` feature is
/// enabled; otherwise runs it inline. `workers = 0` means "rayon default".
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 1 {
        // A one-thread pool would still round-trip through rayon; results
        // are identical either way, so skip the pool.
        return f();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}
