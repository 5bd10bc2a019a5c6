//! Data-parallel dispatch with a sequential fallback.
//!
//! Every parallel loop in this crate partitions its output into disjoint
//! chunks (rows, windows, views), so results are bitwise identical whatever
//! the thread count. Building without the `parallel` feature swaps in plain
//! sequential loops with no other behavioral change.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to each `chunk`-sized slice of `data`, indexed in order.
#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Sequential reference version of [`for_each_chunk_mut`]; always available
/// so benchmarks can compare both paths inside one build.
pub fn for_each_chunk_mut_seq<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Run `f` over each index in `0..n`, writing into per-index output slots.
#[cfg(feature = "parallel")]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_dispatch_matches_sequential() {
        let mut a = vec![0u64; 64];
        let mut b = vec![0u64; 64];
        let body = |i: usize, c: &mut [u64]| {
            for (j, x) in c.iter_mut().enumerate() {
                *x = (i * 1000 + j) as u64;
            }
        };
        for_each_chunk_mut(&mut a, 8, body);
        for_each_chunk_mut_seq(&mut b, 8, body);
        assert_eq!(a, b);
    }

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(10, |i| i * i);
        assert_eq!(v, vec![0, 1, 4, 9, 16, 25, 36, 49, 64, 81]);
    }
}
