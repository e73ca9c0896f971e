use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ParamVector, Purpose, RngStream};
use crate::error::{invalid, Result};

/// Strictly increasing set of indices drawn from `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSubset(Vec<usize>);

impl IndexSubset {
    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }
}

/// Number of participating users for fraction `r` of `n`: `round(r n)`, at least one.
pub fn active_count(n: usize, r: f64) -> usize {
    ((r * n as f64).round() as usize).clamp(1, n.max(1))
}

/// Uniform draw of an `m`-subset of `0..n`, deterministic in `rng`.
pub fn sample_without_replacement(n: usize, m: usize, rng: &RngStream) -> Result<IndexSubset> {
    if m == 0 || m > n {
        return Err(invalid(format!(
            "subset size must satisfy 1 <= m <= n (m = {m}, n = {n})"
        )));
    }
    if m == n {
        return Ok(IndexSubset::full(n));
    }
    let mut r = rng.rng();
    let mut picked = index::sample(&mut r, n, m).into_vec();
    picked.sort_unstable();
    Ok(IndexSubset(picked))
}

const CHUNK: usize = 2048;

/// Runs `trials` independent trials in fixed-size chunks and merges chunk
/// accumulators in chunk order, so the result does not depend on the number
/// of worker threads.
pub(crate) fn chunked_reduce<A, I, F, M>(trials: usize, init: I, per_trial: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(A, A) -> A,
{
    let chunks = trials.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            for t in lo..hi {
                per_trial(&mut acc, t as u64);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(init(), merge)
}

/// Monte-Carlo estimate of `E || mean_{i in A} a_i - mu ||^2` over uniformly
/// drawn `m`-subsets `A`, with `mu` the population mean.
pub fn subset_mean_variance(
    values: &[ParamVector],
    m: usize,
    trials: usize,
    rng: &RngStream,
) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("values must be nonempty"));
    }
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let n = values.len();
    if m == 0 || m > n {
        return Err(invalid(format!("subset size {m} outside 1..={n}")));
    }
    let dim = values[0].dim();
    for v in values {
        v.check_dim(dim, "value")?;
    }
    let mu = ParamVector::mean(values).expect("nonempty");
    if m == n {
        return Ok(0.0);
    }
    let total = chunked_reduce(
        trials,
        || 0.0f64,
        |acc, t| {
            let subset = sample_without_replacement(n, m, &rng.child(Purpose::Trial(t)))
                .expect("validated above");
            let mut mean = ParamVector::zeros(dim);
            for &i in subset.indices() {
                mean += &values[i];
            }
            mean.scale(1.0 / m as f64);
            *acc += mean.dist(&mu).powi(2);
        },
        |a, b| a + b,
    );
    Ok(total / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(xs: &[f64]) -> Vec<ParamVector> {
        xs.iter().map(|&x| ParamVector::new(vec![x]).unwrap()).collect()
    }

    #[test]
    fn full_and_singleton_subsets() {
        let s = RngStream::new(3);
        assert_eq!(sample_without_replacement(5, 5, &s).unwrap().indices(), &[0, 1, 2, 3, 4]);
        assert_eq!(sample_without_replacement(1, 1, &s).unwrap().indices(), &[0]);
    }

    #[test]
    fn invalid_sizes() {
        let s = RngStream::new(3);
        assert!(sample_without_replacement(4, 0, &s).is_err());
        assert!(sample_without_replacement(4, 5, &s).is_err());
    }

    #[test]
    fn subsets_are_strictly_increasing_and_deterministic() {
        for seed in 0..50 {
            let s = RngStream::new(seed).purpose(Purpose::Selection);
            let a = sample_without_replacement(20, 7, &s).unwrap();
            assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
            assert!(a.indices().iter().all(|&i| i < 20));
            assert_eq!(a, sample_without_replacement(20, 7, &s).unwrap());
        }
    }

    #[test]
    fn active_count_rounds_with_floor_one() {
        assert_eq!(active_count(50, 0.2), 10);
        assert_eq!(active_count(10, 0.01), 1);
        assert_eq!(active_count(10, 0.25), 3);
        assert_eq!(active_count(10, 1.0), 10);
    }

    #[test]
    fn variance_degenerate_cases() {
        let s = RngStream::new(1);
        let v = scalars(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(subset_mean_variance(&v, 4, 10, &s).unwrap(), 0.0);
        let same = scalars(&[2.5; 6]);
        assert_eq!(subset_mean_variance(&same, 3, 100, &s).unwrap(), 0.0);
        assert!(subset_mean_variance(&v, 2, 0, &s).is_err());
        assert!(subset_mean_variance(&[], 1, 10, &s).is_err());
    }
}
