//! Data-parallel map helpers with a sequential fallback.
//!
//! All hot loops in the crate funnel through [`map_indexed`], which fans work
//! out over a thread pool when the `parallel` feature is enabled and the
//! caller asks for it. Results are always collected into an index-ordered
//! `Vec` and reduced sequentially by the caller, so the outcome is bitwise
//! identical whichever execution mode ran the map.

/// Execution strategy for a data-parallel map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Use the rayon thread pool (falls back to sequential execution when
    /// the crate is built without the `parallel` feature).
    Parallel,
    /// Run on the calling thread.
    Sequential,
}

impl Default for Mode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

/// Map `f` over `0..len`, returning results in index order.
///
/// `f` must be a pure function of its index argument; under
/// [`Mode::Parallel`] invocations may run concurrently and in any order.
pub fn map_indexed<T, F>(mode: Mode, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        Mode::Sequential => (0..len).map(f).collect(),
        Mode::Parallel => map_parallel(len, f),
    }
}

#[cfg(feature = "parallel")]
fn map_parallel<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_parallel<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Configure the global thread pool size. Returns the effective thread
/// count. Without the `parallel` feature this is a no-op reporting one
/// thread. Calling it twice is harmless: the second call keeps the first
/// pool and reports its size.
pub fn configure_threads(threads: usize) -> usize {
    #[cfg(feature = "parallel")]
    {
        let threads = threads.max(1);
        // Ignore the error: the global pool can only be built once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let out = map_indexed(Mode::Parallel, 100, |i| i * i);
        let expect: Vec<usize> = (0..100).map(|i| i * i).collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn modes_agree_exactly() {
        let f = |i: usize| (i as f64 + 0.5).sin();
        let par = map_indexed(Mode::Parallel, 1000, f);
        let seq = map_indexed(Mode::Sequential, 1000, f);
        assert_eq!(par, seq);
    }

    #[test]
    fn empty_map_is_empty() {
        let out: Vec<u8> = map_indexed(Mode::Parallel, 0, |_| 0u8);
        assert!(out.is_empty());
    }
}
