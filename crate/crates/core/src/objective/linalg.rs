//! Small dense helpers on top of nalgebra, used by the analytic tasks and the
//! closed-form oracles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::kernel::{ParamVector, StreamRng};

pub type Matrix = DMatrix<f64>;

/// `A v` with a fixed summation order (row by row, left to right).
pub fn matvec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, vj) in v.iter().enumerate() {
            s += a[(i, j)] * vj;
        }
        *o = s;
    }
    out
}

pub fn spectral_norm(a: &Matrix) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()))
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &e| m.min(e))
}

pub fn is_symmetric(a: &Matrix, tol: f64) -> bool {
    a.is_square()
        && (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol))
}

pub fn gaussian_vector(dim: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform draw from the unit sphere in `R^dim`.
pub fn unit_vector(dim: usize, rng: &mut StreamRng) -> ParamVector {
    loop {
        let g = ParamVector::from_raw(gaussian_vector(dim, rng));
        let n = g.norm();
        if n > 1e-300 {
            return g.scaled(1.0 / n);
        }
    }
}

/// Symmetric Gaussian matrix scaled to unit spectral norm.
pub fn random_symmetric_unit(dim: usize, rng: &mut StreamRng) -> Matrix {
    let g = Matrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = (&g + g.transpose()) * 0.5;
    let n = spectral_norm(&s);
    if n > 0.0 {
        s / n
    } else {
        s
    }
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(dim: usize, rng: &mut StreamRng) -> Matrix {
    let g = Matrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

pub fn to_dvector(v: &ParamVector) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}
