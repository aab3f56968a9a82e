//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the maps below run on the rayon
//! pool; without it they run on the calling thread. Either way results come
//! back in index order and every reduction over them is a sequential fold, so
//! outputs do not depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the sequential path is used even when `parallel` is on.
pub const MIN_PARALLEL_LEN: usize = 256;

/// Evaluates `f(0..len)` and returns the results in index order.
pub fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if len >= MIN_PARALLEL_LEN {
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Like [`map_range`], but always fans out (one task per item). Used for coarse
/// tasks such as Monte Carlo replications and leave-one-out fits.
pub fn map_tasks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        return (0..len).into_par_iter().with_max_len(1).map(f).collect();
    }
    #[allow(unreachable_code)]
    (0..len).map(f).collect()
}

/// Number of worker threads the parallel helpers will use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        return rayon::current_num_threads();
    }
    #[allow(unreachable_code)]
    1
}

/// Neumaier-compensated sum in slice order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        let t = map_tasks(17, |i| i + 1);
        assert_eq!(t, (1..=17).collect::<Vec<_>>());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(compensated_sum(&v), 2e-16);
    }
}
