//! Execution policy for the data-parallel inner loops.
//!
//! With the `parallel` feature (on by default) the hot loops run on the rayon
//! global pool; without it every policy degrades to the sequential path.
//! Results never depend on the policy: reductions use a fixed chunk
//! partition that is combined in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for deterministic reductions.
pub(crate) const REDUCE_CHUNK: usize = 4096;

/// How data-parallel loops are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this policy will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// `(0..len).map(f).collect()`, preserving index order.
    pub(crate) fn map_range<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Calls `f(chunk_index, chunk)` on consecutive `chunk`-sized pieces of `out`.
    pub(crate) fn for_chunks_mut<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }

    /// Maps every fixed-size block `[k*chunk, min((k+1)*chunk, len))` and
    /// returns the per-block results in block order.
    pub(crate) fn map_blocks<T, F>(self, len: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    {
        let blocks = len.div_ceil(chunk);
        self.map_range(blocks, |k| f(k * chunk..((k + 1) * chunk).min(len)))
    }
}
