//! Thin data-parallel helpers. With the `parallel` feature they fan out over
//! rayon's pool, otherwise they run sequentially with identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Calls `f(chunk_index, chunk)` for consecutive chunks of `data`.
#[cfg(feature = "parallel")]
pub fn for_chunks<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.par_chunks_mut(chunk.max(1))
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub fn for_chunks<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.chunks_mut(chunk.max(1))
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Sums `f(i)` over `0..n`; the reduction order is fixed so results do not
/// depend on thread scheduling.
pub fn sum<F>(n: usize, f: F) -> num_complex::Complex64
where
    F: Fn(usize) -> num_complex::Complex64 + Sync + Send,
{
    const BLOCK: usize = 256;
    let blocks = n.div_ceil(BLOCK);
    let partial = map(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        (lo..hi).map(&f).sum::<num_complex::Complex64>()
    });
    partial.into_iter().sum()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
