//! Data-parallel helpers. With the `parallel` feature (default) these fan out
//! over rayon's pool; without it they run the same closures sequentially, so
//! results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether the parallel backend is compiled in.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maps over `0..n` and folds the results with an associative `combine`.
pub fn map_reduce_range<U, F, R>(n: u64, identity: U, f: F, combine: R) -> U
where
    U: Send + Clone + Sync,
    F: Fn(u64) -> U + Sync + Send,
    R: Fn(U, U) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| identity.clone(), &combine)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(identity, combine)
    }
}

/// Folds fixed-size chunks of `items` with `fold`, then merges chunk results
/// in order with `combine`.
pub fn fold_chunks<T, U, F, R>(items: &[T], chunk: usize, identity: U, fold: F, combine: R) -> U
where
    T: Sync,
    U: Send + Clone + Sync,
    F: Fn(U, &T) -> U + Sync + Send,
    R: Fn(U, U) -> U + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        items
            .par_chunks(chunk)
            .map(|c| c.iter().fold(identity.clone(), &fold))
            .reduce(|| identity.clone(), &combine)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items
            .chunks(chunk)
            .map(|c| c.iter().fold(identity.clone(), &fold))
            .fold(identity.clone(), combine)
    }
}
