//! Deterministic data-parallel primitives.
//!
//! Batch work (rollouts, gradient sums over pairs or trajectories, Fisher
//! products over states) is expressed through these helpers so that the
//! `parallel` feature changes wall-clock time and nothing else. Reductions
//! are chunked at fixed boundaries and partial sums are merged in index
//! order, so parallel and sequential builds produce bit-identical floats.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk size for reductions. Fixed (not derived from thread count) so the
/// summation tree is identical on every machine and build.
pub const REDUCE_CHUNK: usize = 64;

/// Maps `0..n` and collects results in index order.
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        indexed_map_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        indexed_map_sequential(n, f)
    }
}

pub fn indexed_map_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn indexed_map_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Sums per-item dense contributions into a `dim`-length vector.
///
/// `add(i, acc)` must add item `i`'s contribution into `acc`. Items are
/// grouped into [`REDUCE_CHUNK`]-sized chunks; each chunk accumulates
/// sequentially and chunk sums are merged in order.
pub fn chunked_vector_sum<F>(n: usize, dim: usize, add: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunk_sums = {
        #[cfg(feature = "parallel")]
        {
            chunk_starts(n)
                .into_par_iter()
                .map(|start| chunk_vector(start, n, dim, &add))
                .collect::<Vec<_>>()
        }
        #[cfg(not(feature = "parallel"))]
        {
            chunk_starts(n)
                .into_iter()
                .map(|start| chunk_vector(start, n, dim, &add))
                .collect::<Vec<_>>()
        }
    };
    let mut total = vec![0.0; dim];
    for cs in chunk_sums {
        for (t, c) in total.iter_mut().zip(cs.iter()) {
            *t += c;
        }
    }
    total
}

/// Sums a per-item scalar, chunked like [`chunked_vector_sum`].
pub fn chunked_scalar_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunk_sums = {
        #[cfg(feature = "parallel")]
        {
            chunk_starts(n)
                .into_par_iter()
                .map(|start| chunk_scalar(start, n, &f))
                .collect::<Vec<_>>()
        }
        #[cfg(not(feature = "parallel"))]
        {
            chunk_starts(n)
                .into_iter()
                .map(|start| chunk_scalar(start, n, &f))
                .collect::<Vec<_>>()
        }
    };
    chunk_sums.into_iter().sum()
}

fn chunk_starts(n: usize) -> Vec<usize> {
    (0..n).step_by(REDUCE_CHUNK).collect()
}

fn chunk_vector<F>(start: usize, n: usize, dim: usize, add: &F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]),
{
    let mut acc = vec![0.0; dim];
    for i in start..(start + REDUCE_CHUNK).min(n) {
        add(i, &mut acc);
    }
    acc
}

fn chunk_scalar<F>(start: usize, n: usize, f: &F) -> f64
where
    F: Fn(usize) -> f64,
{
    let mut acc = 0.0;
    for i in start..(start + REDUCE_CHUNK).min(n) {
        acc += f(i);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexed_map_preserves_order() {
        let v = indexed_map(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn vector_sum_matches_plain_loop() {
        let items: Vec<f64> = (0..517).map(|i| (i as f64).sin()).collect();
        let got = chunked_vector_sum(items.len(), 2, |i, acc| {
            acc[0] += items[i];
            acc[1] += items[i] * items[i];
        });
        // Same chunked order, computed by hand.
        let mut want = vec![0.0; 2];
        for start in (0..items.len()).step_by(REDUCE_CHUNK) {
            let mut part = vec![0.0; 2];
            for i in start..(start + REDUCE_CHUNK).min(items.len()) {
                part[0] += items[i];
                part[1] += items[i] * items[i];
            }
            want[0] += part[0];
            want[1] += part[1];
        }
        assert_eq!(got, want);
    }

    #[test]
    fn scalar_sum_matches_vector_sum() {
        let s = chunked_scalar_sum(1000, |i| 1.0 / (1.0 + i as f64));
        let v = chunked_vector_sum(1000, 1, |i, acc| acc[0] += 1.0 / (1.0 + i as f64));
        assert_eq!(s, v[0]);
    }
}
