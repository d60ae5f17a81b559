//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these run on the rayon global pool;
//! without it they fall back to plain sequential iteration. Every helper
//! returns results in index order and performs reductions sequentially over
//! fixed-size chunks, so outputs are bit-identical across thread counts and
//! across the two builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per work unit for chunked map/reduce. Fixed so that reduction order
/// does not depend on the number of threads.
pub const CHUNK: usize = 256;

/// `(0..len).map(f).collect()`, possibly in parallel.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Map over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
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

/// Fill `out` in chunks of `CHUNK * stride` elements. `f` receives the index
/// of the first row in the chunk and the mutable chunk.
pub fn fill_rows<T, F>(out: &mut [T], stride: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = CHUNK * stride.max(1);
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k * CHUNK, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k * CHUNK, c));
    }
}

/// Split `0..len` into `CHUNK`-sized ranges, map each range, then fold the
/// partial results left to right.
pub fn map_reduce_chunks<T, M, R>(len: usize, map: M, init: T, reduce: R) -> T
where
    T: Send,
    M: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    R: Fn(T, T) -> T,
{
    let n_chunks = len.div_ceil(CHUNK);
    let partials = map_indexed(n_chunks, |k| {
        let start = k * CHUNK;
        map(start..(start + CHUNK).min(len))
    });
    partials.into_iter().fold(init, reduce)
}

/// Maximum of `f(i)` over `0..len`; `0.0` for an empty range. NaN propagates.
pub fn max_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_reduce_chunks(len, |r| r.map(&f).fold(0.0_f64, nan_max), 0.0, nan_max)
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn fill_rows_covers_every_row() {
        let mut out = vec![0usize; 3 * 1000];
        fill_rows(&mut out, 3, |first, chunk| {
            for (r, row) in chunk.chunks_mut(3).enumerate() {
                row.fill(first + r);
            }
        });
        for (i, row) in out.chunks(3).enumerate() {
            assert_eq!(row, &[i, i, i]);
        }
    }

    #[test]
    fn chunked_sum_matches_sequential_fold() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let par = map_reduce_chunks(xs.len(), |r| xs[r].iter().sum::<f64>(), 0.0, |a, b| a + b);
        let seq = xs
            .chunks(CHUNK)
            .map(|c| c.iter().sum::<f64>())
            .fold(0.0, |a, b| a + b);
        assert_eq!(par.to_bits(), seq.to_bits());
    }

    #[test]
    fn max_propagates_nan() {
        assert!(max_indexed(10, |i| if i == 7 { f64::NAN } else { 1.0 }).is_nan());
        assert_eq!(max_indexed(0, |_| 1.0), 0.0);
    }
}
