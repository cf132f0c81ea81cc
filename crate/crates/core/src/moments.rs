//! First moments in closed form: `E X_t = e^{tB̃} E X_0 + (∫₀ᵗ e^{uB̃} du) β̃`.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, CbiError, Result};
use crate::params::DerivedParams;

fn checked_exp(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CbiError::Overflow);
    }
    let e = m.exp();
    if e.iter().all(|v| v.is_finite()) {
        Ok(e)
    } else {
        Err(CbiError::Overflow)
    }
}

/// `e^{tA} v` (Padé scaling and squaring).
pub fn expm_action(a: &DMatrix<f64>, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
    dim_check("matrix columns", a.nrows(), a.ncols())?;
    dim_check("vector", a.nrows(), v.len())?;
    if t == 0.0 {
        return Ok(v.clone());
    }
    Ok(checked_exp(&(a * t))? * v)
}

/// `(e^{tA}, ∫₀ᵗ e^{uA} du)` from the exponential of `[[A, I], [0, 0]]·t`.
pub fn exp_and_integral(a: &DMatrix<f64>, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = a.nrows();
    dim_check("matrix columns", d, a.ncols())?;
    let mut block = DMatrix::zeros(2 * d, 2 * d);
    block.view_mut((0, 0), (d, d)).copy_from(&(a * t));
    block.view_mut((0, d), (d, d)).fill_diagonal(t);
    let e = checked_exp(&block)?;
    Ok((e.view((0, 0), (d, d)).into_owned(), e.view((0, d), (d, d)).into_owned()))
}

/// `E X_t` started from mean `m0`.
pub fn mean(der: &DerivedParams, m0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    mean_affine(&der.b_tilde, &der.beta_tilde, m0, t)
}

/// Solution of `m' = A m + b`, `m(0) = m0`.
pub fn mean_affine(a: &DMatrix<f64>, b: &DVector<f64>, m0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    dim_check("initial mean", a.nrows(), m0.len())?;
    dim_check("drift vector", a.nrows(), b.len())?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CbiError::InvalidConfig(format!("time must be finite and nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(m0.clone());
    }
    let (e, j) = exp_and_integral(a, t)?;
    Ok(e * m0 + j * b)
}
