use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{Purpose, RngStream};
use crate::objective::Dataset;

use super::distance::DiscreteDistribution;

/// Two-group label-skew layout over ten classes.
///
/// Users `0..n/2` hold `a` samples of each of classes 0-4. User `n/2 + j`
/// holds `a/2` samples of class `j mod 5` and `2a` samples of class
/// `5 + j mod 5`; the `a/2` block is dropped when `diff_hetero` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n: usize,
    pub a: usize,
    pub diff_hetero: bool,
}

pub const PARTITION_CLASSES: usize = 10;

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(invalid(format!("user count must be even and at least 2, got {}", self.n)));
        }
        if self.a < 2 || self.a % 2 != 0 {
            return Err(invalid(format!("a must be even and at least 2, got {}", self.a)));
        }
        Ok(())
    }

    /// Per-class sample counts for user `i`.
    pub fn counts(&self, i: usize) -> [usize; PARTITION_CLASSES] {
        let mut c = [0; PARTITION_CLASSES];
        let half = self.n / 2;
        if i < half {
            for x in c.iter_mut().take(5) {
                *x = self.a;
            }
        } else {
            let j = (i - half) % 5;
            if !self.diff_hetero {
                c[j] = self.a / 2;
            }
            c[5 + j] = 2 * self.a;
        }
        c
    }

    /// Total demand per class across all users.
    pub fn class_demand(&self) -> [usize; PARTITION_CLASSES] {
        let mut d = [0; PARTITION_CLASSES];
        for i in 0..self.n {
            for (x, c) in d.iter_mut().zip(self.counts(i)) {
                *x += c;
            }
        }
        d
    }

    /// The label distribution of user `i`.
    pub fn label_distribution(&self, i: usize) -> DiscreteDistribution<usize> {
        let c = self.counts(i);
        let total: usize = c.iter().sum();
        let (support, mass): (Vec<usize>, Vec<f64>) = c
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(y, &k)| (y, k as f64 / total as f64))
            .unzip();
        DiscreteDistribution::new(support, mass).expect("counts are positive")
    }
}

/// Per-user sample indices into the source dataset, and the matching datasets.
#[derive(Clone, Debug)]
pub struct Partition {
    pub assignments: Vec<Vec<usize>>,
    pub users: Vec<Dataset>,
}

/// Splits `data` according to `spec`. Each class pool is shuffled with the
/// partition stream and consumed in user order, so assignments are disjoint.
pub fn partition_dataset(data: &Dataset, spec: &PartitionSpec, rng: &RngStream) -> Result<Partition> {
    spec.validate()?;
    if data.num_classes() < PARTITION_CLASSES {
        return Err(invalid(format!(
            "partition needs {PARTITION_CLASSES} classes, dataset has {}",
            data.num_classes()
        )));
    }
    let mut pools = data.indices_by_class();
    let demand = spec.class_demand();
    for (class, (&need, pool)) in demand.iter().zip(&pools).enumerate() {
        if pool.len() < need {
            return Err(Error::Shortage {
                class,
                needed: need,
                available: pool.len(),
            });
        }
    }
    for (class, pool) in pools.iter_mut().enumerate().take(PARTITION_CLASSES) {
        pool.shuffle(&mut rng.child(Purpose::Partition).child(Purpose::Custom(class as u64)).rng());
    }
    let mut cursor = [0usize; PARTITION_CLASSES];
    let mut assignments = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut idx = Vec::new();
        for (class, &k) in spec.counts(i).iter().enumerate() {
            idx.extend_from_slice(&pools[class][cursor[class]..cursor[class] + k]);
            cursor[class] += k;
        }
        assignments.push(idx);
    }
    let users = assignments.iter().map(|a| data.select(a)).collect::<Result<Vec<_>>>()?;
    Ok(Partition { assignments, users })
}

/// Empirical label distribution of a dataset.
pub fn label_distribution(data: &Dataset) -> Result<DiscreteDistribution<usize>> {
    let counts = data.class_counts();
    let total = data.len();
    if total == 0 {
        return Err(invalid("dataset is empty"));
    }
    let (support, mass): (Vec<usize>, Vec<f64>) = counts
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(y, &k)| (y, k as f64 / total as f64))
        .unzip();
    DiscreteDistribution::new(support, mass)
}

/// CSV with header `user,sample`, one row per assigned sample.
pub fn partition_csv(assignments: &[Vec<usize>]) -> String {
    let mut out = String::from("user,sample\n");
    for (u, idx) in assignments.iter().enumerate() {
        for s in idx {
            writeln!(out, "{u},{s}").expect("string write");
        }
    }
    out
}

pub fn write_partition_csv(path: &Path, assignments: &[Vec<usize>]) -> Result<()> {
    std::fs::write(path, partition_csv(assignments))?;
    Ok(())
}
