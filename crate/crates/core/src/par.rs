//! Order-preserving map over independent experiment runs, parallel when the
//! `parallel` feature is enabled (the default) and sequential otherwise.
//!
//! Callers make each run self-contained — seeded from
//! [`crate::sample::derive_seed`], no shared mutable state — so the two code
//! paths return identical results and the feature flag only changes wall
//! time. [`map_runs_seq`] is always sequential under either feature
//! configuration, as a baseline for benchmarks and for debugging.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `inputs`, in parallel when built with the `parallel`
/// feature. Output order matches input order either way.
#[cfg(feature = "parallel")]
pub fn map_runs<T, R, F>(inputs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    inputs.into_par_iter().map(f).collect()
}

/// Maps `f` over `inputs`, in parallel when built with the `parallel`
/// feature. Output order matches input order either way.
#[cfg(not(feature = "parallel"))]
pub fn map_runs<T, R, F>(inputs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    inputs.into_iter().map(f).collect()
}

/// Sequential map with the same bounds as [`map_runs`], regardless of
/// features.
pub fn map_runs_seq<T, R, F>(inputs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    inputs.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{derive_seed, sample_random_channel, Prng};
    use rand::SeedableRng;

    #[test]
    fn parallel_and_sequential_agree_elementwise() {
        let run = |index: u64| {
            let mut rng = Prng::seed_from_u64(derive_seed(7, index));
            let k = sample_random_channel(2, 3, &mut rng).unwrap();
            k.matrix().iter().map(|z| z.re + z.im).sum::<f64>()
        };
        let indices: Vec<u64> = (0..16).collect();
        let par = map_runs(indices.clone(), run);
        let seq = map_runs_seq(indices, run);
        assert_eq!(par.len(), seq.len());
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn order_is_preserved() {
        let out = map_runs((0..100usize).collect(), |i| i * i);
        assert_eq!(out, (0..100usize).map(|i| i * i).collect::<Vec<_>>());
    }
}
