use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One labeled example: features `x` and class id `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: usize,
}

/// Finite labeled dataset with a declared label set `0..num_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    feature_dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, num_classes: usize) -> Result<Self> {
        let feature_dim = samples.first().map(|s| s.x.len()).unwrap_or(0);
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != feature_dim {
                return Err(invalid(format!("sample {i} has {} features, expected {feature_dim}", s.x.len())));
            }
            if s.y >= num_classes {
                return Err(invalid(format!("sample {i} has label {} outside 0..{num_classes}", s.y)));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("sample {i} has non-finite features")));
            }
        }
        Ok(Self {
            samples,
            feature_dim,
            num_classes,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Sample indices grouped by label.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, s) in self.samples.iter().enumerate() {
            out[s.y].push(i);
        }
        out
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| invalid(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            feature_dim: self.feature_dim,
            num_classes: self.num_classes,
        })
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for s in &self.samples {
            c[s.y] += 1;
        }
        c
    }
}
