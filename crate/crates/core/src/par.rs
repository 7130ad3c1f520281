//! Execution policy for the data-parallel loops (Monte Carlo paths, sweeps).
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] silently runs
//! serially. Both policies produce identical results: work items are indexed
//! and outputs are collected in index order before any reduction.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Pairwise (cascade) summation; error grows as O(log n) rather than O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let f = |i: usize| (i as f64).sqrt();
        let a = map_indexed(10_000, Execution::Serial, f);
        let b = map_indexed(10_000, Execution::Parallel, f);
        assert_eq!(a, b);
    }

    #[test]
    fn pairwise_sum_matches_exact_integer_sum() {
        let xs: Vec<f64> = (1..=100_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 100_000.0 * 100_001.0 / 2.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
