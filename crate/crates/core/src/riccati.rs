//! Branching and immigration mechanisms, the generalized Riccati system
//! `∂ₜv = −φ(v)`, `v(0) = λ`, and the Laplace transform it induces.

use crate::error::{dim_check, CbiError, Result};
use crate::ode::{dopri5, OdeSolution, Tolerances};
use crate::params::{AdmissibleParams, DerivedParams};

/// `φ_i(λ) = c_i λ_i² − ⟨B e_i, λ⟩ + ∫ (e^{−⟨λ,z⟩} − 1 + λ_i (1 ∧ z_i)) μ_i(dz)`.
pub fn phi(p: &AdmissibleParams, lam: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p.d];
    phi_into(p, lam, &mut out)?;
    Ok(out)
}

fn phi_into(p: &AdmissibleParams, lam: &[f64], out: &mut [f64]) -> Result<()> {
    dim_check("lambda", p.d, lam.len())?;
    for i in 0..p.d {
        let drift: f64 = (0..p.d).map(|k| p.b[(k, i)] * lam[k]).sum();
        let jumps = if p.mu[i].is_zero() {
            0.0
        } else {
            p.mu[i].exp_branching_integral(lam, i)?
        };
        out[i] = p.c[i] * lam[i] * lam[i] - drift + jumps;
    }
    Ok(())
}

/// The same function written with the modified drift:
/// `c_i λ_i² − ⟨B̃ e_i, λ⟩ + ∫ (e^{−⟨λ,z⟩} − 1 + ⟨λ,z⟩) μ_i(dz)`.
pub fn phi_compensated(p: &AdmissibleParams, der: &DerivedParams, lam: &[f64]) -> Result<Vec<f64>> {
    dim_check("lambda", p.d, lam.len())?;
    (0..p.d)
        .map(|i| {
            let drift: f64 = (0..p.d).map(|k| der.b_tilde[(k, i)] * lam[k]).sum();
            let jumps = if p.mu[i].is_zero() {
                0.0
            } else {
                p.mu[i].compensated_exp_integral(lam)?
            };
            Ok(p.c[i] * lam[i] * lam[i] - drift + jumps)
        })
        .collect()
}

/// `ψ(λ) = ⟨β, λ⟩ + ∫ (1 − e^{−⟨λ,z⟩}) ν(dz)`.
pub fn psi(p: &AdmissibleParams, lam: &[f64]) -> Result<f64> {
    dim_check("lambda", p.d, lam.len())?;
    let linear: f64 = p.beta.iter().zip(lam).map(|(b, l)| b * l).sum();
    let jumps = if p.nu.is_zero() {
        0.0
    } else {
        p.nu.exp_immigration_integral(lam)?
    };
    Ok(linear + jumps)
}

/// Trajectory of `v(·, λ)` together with `∫₀ᵗ ψ(v(s, λ)) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub lambda0: Vec<f64>,
    /// Accepted step endpoints, `grid[0] = 0`.
    pub grid: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub psi_accum: Vec<f64>,
    ode: OdeSolution,
}

impl RiccatiSolution {
    /// Polynomial degree of the interpolant between grid points.
    pub const INTERPOLANT_DEGREE: usize = 4;

    pub fn t_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// `v(t, λ)` for `t ∈ [0, t_end]`.
    pub fn v_at(&self, t: f64) -> Vec<f64> {
        let d = self.lambda0.len();
        let mut y = self.ode.eval(t);
        y.truncate(d);
        for v in &mut y {
            *v = v.max(0.0);
        }
        y
    }

    /// `∫₀ᵗ ψ(v(s, λ)) ds` for `t ∈ [0, t_end]`.
    pub fn psi_at(&self, t: f64) -> f64 {
        let d = self.lambda0.len();
        let k = self.grid.partition_point(|&s| s < t);
        if k < self.grid.len() && self.grid[k] == t {
            return self.psi_accum[k];
        }
        if k == 0 {
            return self.psi_accum[0];
        }
        if k == self.grid.len() {
            return *self.psi_accum.last().unwrap();
        }
        self.ode.eval(t)[d].clamp(self.psi_accum[k - 1], self.psi_accum[k])
    }

    pub fn v_end(&self) -> &[f64] {
        self.v.last().unwrap()
    }

    pub fn psi_end(&self) -> f64 {
        *self.psi_accum.last().unwrap()
    }
}

/// Solves the Riccati system with the immigration integral appended as an
/// extra component.
pub fn solve_v(p: &AdmissibleParams, lam: &[f64], t: f64, tol: Tolerances) -> Result<RiccatiSolution> {
    dim_check("lambda", p.d, lam.len())?;
    if lam.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(CbiError::PreconditionViolated("lambda must be finite and nonnegative".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CbiError::InvalidConfig(format!("time must be finite and nonnegative, got {t}")));
    }
    let d = p.d;
    let mut y0 = lam.to_vec();
    y0.push(0.0);
    let mut vplus = vec![0.0; d];
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        for i in 0..d {
            vplus[i] = y[i].max(0.0);
        }
        phi_into(p, &vplus, &mut dy[..d])?;
        for v in &mut dy[..d] {
            *v = -*v;
        }
        dy[d] = psi(p, &vplus)?.max(0.0);
        Ok(())
    };
    let ode = dopri5(rhs, &y0, t, tol, d + 1)?;
    let mut v = Vec::with_capacity(ode.y.len());
    let mut psi_accum: Vec<f64> = Vec::with_capacity(ode.y.len());
    for y in &ode.y {
        v.push(y[..d].to_vec());
        let prev = psi_accum.last().copied().unwrap_or(0.0);
        psi_accum.push(y[d].max(prev));
    }
    v[0] = lam.to_vec();
    Ok(RiccatiSolution {
        lambda0: lam.to_vec(),
        grid: ode.t.clone(),
        v,
        psi_accum,
        ode,
    })
}

/// `E[exp(−⟨λ, X_t⟩) | X_0 = x] = exp(−⟨x, v(t, λ)⟩ − ∫₀ᵗ ψ(v(s, λ)) ds)`.
pub fn laplace_transform(p: &AdmissibleParams, x: &[f64], lam: &[f64], t: f64, tol: Tolerances) -> Result<f64> {
    dim_check("x", p.d, x.len())?;
    dim_check("lambda", p.d, lam.len())?;
    if lam.iter().all(|&l| l == 0.0) {
        return Ok(1.0);
    }
    if t == 0.0 {
        let dot: f64 = x.iter().zip(lam).map(|(a, b)| a * b).sum();
        return Ok((-dot).exp());
    }
    let sol = solve_v(p, lam, t, tol)?;
    Ok(laplace_from_solution(&sol, x))
}

/// Laplace transform at the end of an existing solution, for several starting points.
pub fn laplace_from_solution(sol: &RiccatiSolution, x: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(sol.v_end()).map(|(a, b)| a * b).sum();
    (-dot - sol.psi_end()).exp()
}

/// Solution of the scalar equation `v' = b v − c v²`, `v(0) = λ`.
pub fn cir_closed_form_v(c: f64, b: f64, lam: f64, t: f64) -> f64 {
    // (e^{bt} − 1)/b, continuous at b = 0
    let growth = if b == 0.0 { t } else { (b * t).exp_m1() / b };
    lam * (b * t).exp() / (1.0 + c * lam * growth)
}
