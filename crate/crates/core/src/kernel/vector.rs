use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense real vector holding model parameters or any gradient-like quantity.
///
/// Constructors reject non-finite entries. Arithmetic operators do not
/// re-check; callers that may overflow use [`ParamVector::ensure_finite`] at
/// their boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("parameter vector must have positive dimension"));
        }
        if let Some(j) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite entry at coordinate {j}")));
        }
        Ok(Self(data))
    }

    /// Wraps data produced by internal arithmetic without validation.
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self((0..dim).map(f).collect())
    }

    pub fn basis(dim: usize, j: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[j] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.dim(), x.dim());
        for (s, xi) in self.0.iter_mut().zip(&x.0) {
            *s += a * xi;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.0 {
            *s *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|x| a * x).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        match self.0.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(j) => Err(Error::Numeric(format!(
                "{context}: non-finite value at coordinate {j}"
            ))),
        }
    }

    pub fn check_dim(&self, dim: usize, what: &str) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(invalid(format!(
                "{what} has dimension {}, expected {dim}",
                self.dim()
            )))
        }
    }

    /// Arithmetic mean of equally sized vectors, accumulated in slice order as
    /// offsets from the first item (exact when all items are equal).
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a ParamVector>) -> Option<Self> {
        let mut it = items.into_iter();
        let first = it.next()?;
        let mut acc = ParamVector::zeros(first.dim());
        let mut count = 1usize;
        for v in it {
            acc += v;
            acc -= first;
            count += 1;
        }
        let mut out = first.clone();
        out.axpy(1.0 / count as f64, &acc);
        Some(out)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, j: usize) -> &mut f64 {
        &mut self.0[j]
    }
}

impl AddAssign<&ParamVector> for ParamVector {
    fn add_assign(&mut self, rhs: &ParamVector) {
        debug_assert_eq!(self.dim(), rhs.dim());
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl SubAssign<&ParamVector> for ParamVector {
    fn sub_assign(&mut self, rhs: &ParamVector) {
        debug_assert_eq!(self.dim(), rhs.dim());
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a -= b;
        }
    }
}

impl Add for &ParamVector {
    type Output = ParamVector;
    fn add(self, rhs: &ParamVector) -> ParamVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &ParamVector {
    type Output = ParamVector;
    fn sub(self, rhs: &ParamVector) -> ParamVector {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul<&ParamVector> for f64 {
    type Output = ParamVector;
    fn mul(self, rhs: &ParamVector) -> ParamVector {
        rhs.scaled(self)
    }
}

impl Neg for &ParamVector {
    type Output = ParamVector;
    fn neg(self) -> ParamVector {
        self.scaled(-1.0)
    }
}
