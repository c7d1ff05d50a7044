//! Batch execution policy.
//!
//! Every batch entry point takes an [`Execution`]. Results are always
//! collected in input order, so parallel and sequential runs produce the
//! same output bit for bit. Without the `parallel` feature every policy
//! runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    /// Dedicated pool with this many workers.
    Jobs(usize),
}

impl Execution {
    /// `--jobs N` style constructor: `1` is sequential, `0` means all cores.
    pub fn with_jobs(jobs: usize) -> Self {
        match jobs {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::Jobs(n),
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Jobs(n) => match rayon::ThreadPoolBuilder::new().num_threads(*n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
                Err(_) => items.par_iter().map(f).collect(),
            },
            #[cfg(not(feature = "parallel"))]
            _ => items.iter().map(f).collect(),
        }
    }

    /// Like [`Execution::map`] over the index range `0..n`.
    pub fn map_range<U, F>(&self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        let idx: Vec<usize> = (0..n).collect();
        self.map(&idx, |i| f(*i))
    }
}

/// Pairwise (cascade) summation. The grouping depends only on the slice
/// length, so sums are reproducible regardless of how values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| pairwise_sum(values) / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        for exec in [Execution::Parallel, Execution::Jobs(3), Execution::with_jobs(8)] {
            assert_eq!(exec.map(&items, |x| x * x), seq);
        }
    }

    #[test]
    fn pairwise_sum_small_and_large() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_mean(&[1.0, 3.0]), Some(2.0));
        assert_eq!(pairwise_mean(&[]), None);
    }

    #[test]
    fn jobs_constructor() {
        assert_eq!(Execution::with_jobs(1), Execution::Sequential);
        assert_eq!(Execution::with_jobs(0), Execution::Parallel);
        assert_eq!(Execution::with_jobs(4), Execution::Jobs(4));
    }
}
