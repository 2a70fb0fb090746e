//! Execution strategy for the data-parallel sweeps.
//!
//! Results never depend on the strategy: partial results are combined with
//! order-independent reductions (sums, `all`, minimum by canonical order).

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

#[cfg(not(feature = "parallel"))]
impl Exec {
    pub fn resolved(self) -> Exec {
        Exec::Sequential
    }
}

#[cfg(feature = "parallel")]
impl Exec {
    pub fn resolved(self) -> Exec {
        self
    }
}

/// Maps `f` over `items` and returns results in input order.
pub fn map<T, R, F>(exec: Exec, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match exec.resolved() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n` and returns results in index order.
pub fn map_range<R, F>(exec: Exec, n: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    match exec.resolved() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Sums `f` over `0..n`.
pub fn sum_range<F>(exec: Exec, n: u64, f: F) -> [u64; 2]
where
    F: Fn(u64) -> [u64; 2] + Sync + Send,
{
    let add = |a: [u64; 2], b: [u64; 2]| [a[0] + b[0], a[1] + b[1]];
    match exec.resolved() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).reduce(|| [0, 0], add)
        }
        _ => (0..n).map(f).fold([0, 0], add),
    }
}

/// Configures the global thread pool. Only the first call has any effect.
pub fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let f = |i: u64| [i % 3, i * i % 7];
        assert_eq!(sum_range(Exec::Sequential, 500, f), sum_range(Exec::Parallel, 500, f));
        assert_eq!(map_range(Exec::Sequential, 50, |i| i * 2), map_range(Exec::Parallel, 50, |i| i * 2));
    }
}
