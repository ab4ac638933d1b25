//! Deterministic data-parallel reductions.
//!
//! Work is split into fixed-size chunks independent of the thread count; each
//! chunk is reduced sequentially and the per-chunk results are combined in
//! chunk order, so floating-point results are bit-identical for any pool size.

use std::ops::Range;

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 1 << 12;

/// Maps every chunk of `0..len` in parallel and returns the results in order.
pub(crate) fn map_chunks<T, F>(len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let chunk = chunk.max(1);
    let count = len.div_ceil(chunk);
    (0..count)
        .into_par_iter()
        .map(|k| f(k * chunk..((k + 1) * chunk).min(len)))
        .collect()
}

/// Sum of `f(i)` over `0..len`, computed chunkwise in a fixed order.
pub(crate) fn sum<T, F>(len: usize, f: F) -> T
where
    T: Send + std::iter::Sum<T> + Copy + std::ops::Add<Output = T> + Default,
    F: Fn(usize) -> T + Sync,
{
    map_chunks(len, CHUNK, |r| r.map(&f).fold(T::default(), |a, b| a + b))
        .into_iter()
        .fold(T::default(), |a, b| a + b)
}

/// Smallest `i < len` with `pred(i)`. Chunks are scanned in parallel batches
/// and the scan stops after the first batch containing a match.
pub(crate) fn find_first<F>(len: usize, pred: F) -> Option<usize>
where
    F: Fn(usize) -> bool + Sync,
{
    let batch = CHUNK * rayon::current_num_threads().max(1) * 4;
    let mut start = 0;
    while start < len {
        let end = (start + batch).min(len);
        let hit = map_chunks(end - start, CHUNK, |r| r.map(|i| i + start).find(|&i| pred(i)))
            .into_iter()
            .flatten()
            .next();
        if hit.is_some() {
            return hit;
        }
        start = end;
    }
    None
}

/// Number of `i < len` with `pred(i)`.
pub(crate) fn count<F>(len: usize, pred: F) -> u64
where
    F: Fn(usize) -> bool + Sync,
{
    map_chunks(len, CHUNK, |r| r.filter(|&i| pred(i)).count() as u64).into_iter().sum()
}
