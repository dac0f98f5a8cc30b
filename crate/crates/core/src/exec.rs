//! Sequential / data-parallel dispatch for shard-level work.
//!
//! Every data-parallel loop in the crate goes through [`Execution::map`],
//! which returns results in input order. Callers reduce those results in
//! index order, so the two modes are bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon-backed. Falls back to sequential when the `parallel` feature is off.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => items.iter().map(f).collect(),
        }
    }

    pub fn map_chunks<T, R, F>(self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &[T]) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        match self {
            Execution::Sequential => items
                .chunks(chunk)
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items
                .par_chunks(chunk)
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => items
                .chunks(chunk)
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let data: Vec<u64> = (0..1000).collect();
        let a = Execution::Sequential.map(&data, |x| x * x);
        let b = Execution::Parallel.map(&data, |x| x * x);
        assert_eq!(a, b);
        let c = Execution::Sequential.map_chunks(&data, 7, |i, c| (i, c.iter().sum::<u64>()));
        let d = Execution::Parallel.map_chunks(&data, 7, |i, c| (i, c.iter().sum::<u64>()));
        assert_eq!(c, d);
        assert_eq!(c[0], (0, 21));
    }
}
