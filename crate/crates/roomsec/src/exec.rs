//! Execution helpers: data-parallel map/chunk loops with a sequential
//! fallback when the `parallel` feature is disabled.
//!
//! Callers must pass pure closures. Output order always matches input
//! order, and chunked writers receive disjoint regions, so results are
//! bit-identical regardless of feature flags or thread count. The `seq_*`
//! variants are always sequential; benches use them as the baseline.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map `f` over `(index, item)`, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn par_map_indexed<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U + Sync + Send,
{
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Map over index range `0..n`, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn par_map_range<U: Send, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Run `f(chunk_index, chunk)` over consecutive `chunk_len` slices of `data`,
/// in parallel when enabled. Chunks are disjoint, so writes cannot race.
#[cfg(feature = "parallel")]
pub fn par_chunks_mut<T: Send, F>(data: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.par_chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub fn par_chunks_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    for (i, c) in data.chunks_mut(chunk_len).enumerate() {
        f(i, c);
    }
}

/// Always-sequential map; the bench baseline.
pub fn seq_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// `"par"` when the parallel feature is active, `"seq"` otherwise.
/// Bench IDs embed this so baselines from both builds can be compared.
pub fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "par"
    } else {
        "seq"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = par_map(&items, |&x| x * x);
        let base = seq_map(&items, |&x| x * x);
        assert_eq!(out, base);
    }

    #[test]
    fn chunks_cover_everything_once() {
        let mut data = vec![0u32; 1003];
        par_chunks_mut(&mut data, 64, |i, c| {
            for v in c.iter_mut() {
                *v = i as u32 + 1;
            }
        });
        assert!(data.iter().all(|&v| v > 0));
        assert_eq!(data[0], 1);
        assert_eq!(data[1002], (1002 / 64 + 1) as u32);
    }
}
