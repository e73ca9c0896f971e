use super::ParamVector;
use crate::error::{Error, Result};

/// Default central-difference step for unit-scale problems.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `w`.
pub fn finite_diff_grad<F>(f: F, w: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> Result<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let mut probe = w.clone();
    let mut out = ParamVector::zeros(w.dim());
    for j in 0..w.dim() {
        let orig = probe[j];
        probe[j] = orig + h;
        let up = f(&probe)?;
        probe[j] = orig - h;
        let down = f(&probe)?;
        probe[j] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "objective not finite around coordinate {j}"
            )));
        }
        out[j] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// Norm-wise relative error `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &ParamVector, b: &ParamVector) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        a.dist(b) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_gradient() {
        let w = ParamVector::new(vec![0.3, -1.2, 4.0]).unwrap();
        let g = finite_diff_grad(|_| Ok(2.5), &w, DEFAULT_FD_STEP).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn half_norm_squared_recovers_point() {
        let w = ParamVector::new(vec![0.3, -1.2, 4.0]).unwrap();
        let g = finite_diff_grad(|v| Ok(0.5 * v.norm_sq()), &w, DEFAULT_FD_STEP).unwrap();
        assert!(relative_error(&g, &w) < 1e-9);
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        let w = ParamVector::zeros(2);
        assert!(finite_diff_grad(|_| Ok(0.0), &w, 0.0).is_err());
        assert!(matches!(
            finite_diff_grad(|_| Ok(f64::NAN), &w, 1e-5),
            Err(Error::Numeric(_))
        ));
    }
}
