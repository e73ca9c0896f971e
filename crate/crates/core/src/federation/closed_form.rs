use crate::error::{invalid, Error, Result};
use crate::kernel::ParamVector;
use crate::objective::{linalg, QuadraticTask};

/// Stationary point of `F = (1/n) sum_i F_i` for noiseless quadratic users.
///
/// Each `grad F_i(w) = M_i w + c_i` with `M_i = (I - alpha A_i) A_i (I - alpha A_i)`
/// and `c_i = (I - alpha A_i)^2 b_i`, so the minimizer solves
/// `mean(M_i) w = -mean(c_i)`.
pub fn minimize_f_closed_form(tasks: &[QuadraticTask], alpha: f64) -> Result<ParamVector> {
    let first = tasks.first().ok_or_else(|| invalid("federation is empty"))?;
    let d = first.b().dim();
    let eye = linalg::Matrix::identity(d, d);
    let mut m = linalg::Matrix::zeros(d, d);
    let mut c = nalgebra::DVector::<f64>::zeros(d);
    for t in tasks {
        if t.b().dim() != d {
            return Err(invalid("tasks have different dimensions"));
        }
        let p = &eye - t.a() * alpha;
        m += &p * t.a() * &p;
        c += &p * &p * linalg::to_dvector(t.b());
    }
    let n = tasks.len() as f64;
    m /= n;
    c /= n;
    let scale = linalg::spectral_norm(&m).max(1.0);
    if linalg::min_eigenvalue(&((&m + m.transpose()) * 0.5)).abs() <= 1e-14 * scale {
        return Err(Error::Singular("averaged meta-Hessian is singular".into()));
    }
    let sol = m
        .lu()
        .solve(&(-c))
        .ok_or_else(|| Error::Singular("averaged meta-Hessian is singular".into()))?;
    let w = ParamVector::from_raw(sol.iter().copied().collect());
    w.ensure_finite("closed-form minimizer")?;
    Ok(w)
}
