//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in index order regardless of backend, so
//! seeded work is bit-identical whether or not rayon is in play.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution backend for batch helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Sequential,
    /// Falls back to sequential execution when the `parallel` feature is off.
    Parallel,
}

impl Default for Backend {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Backend::Parallel
        } else {
            Backend::Sequential
        }
    }
}

/// Evaluate `f(0..n)` and collect in index order.
pub fn map_indexed<T, F>(backend: Backend, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match backend {
        #[cfg(feature = "parallel")]
        Backend::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Map over a slice, preserving order.
pub fn map_slice<S, T, F>(backend: Backend, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    match backend {
        #[cfg(feature = "parallel")]
        Backend::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Fallible indexed map; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(backend: Backend, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(backend, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backends_agree_on_order() {
        let seq = map_indexed(Backend::Sequential, 1000, |i| i * i);
        let par = map_indexed(Backend::Parallel, 1000, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> = try_map_indexed(Backend::Parallel, 100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}
