//! Data-parallel map over instances.
//!
//! With the `parallel` feature, [`Exec::Parallel`] fans work out over the rayon
//! pool; otherwise it runs in order on the calling thread. Results are always
//! returned in input order, so reductions over them are deterministic.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        self.map_range(items.len(), |i| f(i, &items[i]))
    }
}

/// Configures the global worker pool. `threads = None` reads `D4_THREADS`.
/// Later calls are ignored once the pool exists.
pub fn init_threads(threads: Option<usize>) {
    let requested = threads.or_else(|| std::env::var("D4_THREADS").ok().and_then(|s| s.parse().ok()));
    #[cfg(feature = "parallel")]
    if let Some(n) = requested {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = requested;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..100).collect();
        let seq = Exec::Sequential.map(&items, |i, x| x * 2 + i as u64);
        let par = Exec::Parallel.map(&items, |i, x| x * 2 + i as u64);
        assert_eq!(seq, par);
    }
}
