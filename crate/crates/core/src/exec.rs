//! Worker-pool plumbing for bulk-synchronous rounds.
//!
//! Every parallel helper here partitions an output range into disjoint chunks
//! and returns only after all chunks are written, so a call is one round with
//! a barrier at its end. Results never depend on the worker count.

#[cfg(feature = "parallel")]
use std::collections::HashMap;
#[cfg(feature = "parallel")]
use std::sync::{Arc, Mutex, OnceLock};

/// Upper bound on the number of threads used for a call.
///
/// `Workers::ALL` uses the global pool. `Workers(1)` always runs on the
/// calling thread, which is also what every value means when the crate is
/// built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Workers(pub usize);

impl Workers {
    pub const ALL: Workers = Workers(0);
    pub const SEQUENTIAL: Workers = Workers(1);

    pub fn is_sequential(self) -> bool {
        !cfg!(feature = "parallel") || self.0 == 1
    }
}

impl Default for Workers {
    fn default() -> Self {
        Workers::ALL
    }
}

#[cfg(feature = "parallel")]
fn pool(workers: usize) -> Arc<rayon::ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
    pools
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .expect("failed to build worker pool"),
            )
        })
        .clone()
}

/// Runs `op` inside the pool selected by `workers`.
pub fn install<R: Send>(workers: Workers, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers.0 > 1 {
            return pool(workers.0).install(op);
        }
    }
    let _ = workers;
    op()
}

/// Fills `out` chunk by chunk; `f(start, chunk)` receives the index of the
/// first element of its chunk.
pub fn fill_chunks<T, F>(workers: Workers, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    if workers.is_sequential() {
        for (i, c) in out.chunks_mut(chunk).enumerate() {
            f(i * chunk, c);
        }
        return;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        install(workers, || {
            out.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i * chunk, c))
        });
    }
}

/// Maps `f` over `items` preserving order.
pub fn map<I, R, F>(workers: Workers, items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync + Send,
{
    if workers.is_sequential() {
        return items.iter().map(f).collect();
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        return install(workers, || items.par_iter().map(f).collect());
    }
    #[allow(unreachable_code)]
    items.iter().map(f).collect()
}

/// Chunk length that gives each worker a few chunks without making chunks tiny.
pub fn chunk_len(n: usize) -> usize {
    (n / 64).max(4096)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_chunks_matches_sequential_for_any_worker_count() {
        let reference: Vec<u64> = (0..10_000u64).map(|i| i * i % 97).collect();
        for w in [1, 2, 3, 8] {
            let mut out = vec![0u64; 10_000];
            fill_chunks(Workers(w), &mut out, 333, |start, c| {
                for (j, v) in c.iter_mut().enumerate() {
                    let i = (start + j) as u64;
                    *v = i * i % 97;
                }
            });
            assert_eq!(out, reference);
        }
    }

    #[test]
    fn map_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        assert_eq!(map(Workers(4), &items, |&i| i * 2), (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
