//! Admissible parameter sets, their validation, and the derived quantities
//! (modified drift/immigration parameters and the drift used by the
//! simulator).

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, CbiError, Result};
use crate::measures::{JumpMeasure, MomentKind, RegionTag};

/// Default truncation level for infinite-activity jump parts.
pub const DEFAULT_EPS: f64 = 1e-3;

/// The tuple `(d, c, β, B, ν, μ₁..μ_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleParams {
    pub d: usize,
    /// Diffusion coefficients `c_i ≥ 0`.
    pub c: DVector<f64>,
    /// Constant immigration drift `β ∈ ℝ₊^d`.
    pub beta: DVector<f64>,
    /// Essentially non-negative `d × d` drift matrix.
    pub b: DMatrix<f64>,
    /// Immigration jump measure.
    pub nu: JumpMeasure,
    /// Branching jump measures, one per type.
    pub mu: Vec<JumpMeasure>,
}

impl AdmissibleParams {
    /// Pure diffusion parameters: no jumps at all.
    pub fn diffusion(c: DVector<f64>, beta: DVector<f64>, b: DMatrix<f64>) -> Self {
        let d = c.len();
        Self {
            d,
            c,
            beta,
            b,
            nu: JumpMeasure::zero(d),
            mu: (0..d).map(|_| JumpMeasure::zero(d)).collect(),
        }
    }

    fn check_dimensions(&self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(CbiError::DimensionMismatch {
                what: "d".into(),
                expected: 1,
                found: 0,
            });
        }
        dim_check("c", d, self.c.len())?;
        dim_check("beta", d, self.beta.len())?;
        dim_check("B rows", d, self.b.nrows())?;
        dim_check("B columns", d, self.b.ncols())?;
        dim_check("nu", d, self.nu.dim())?;
        dim_check("mu", d, self.mu.len())?;
        for (i, m) in self.mu.iter().enumerate() {
            dim_check(&format!("mu[{i}]"), d, m.dim())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Computed value: a minimum entry for sign conditions, the integral for
    /// integrability conditions (`+∞` when divergent).
    pub value: f64,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn sign_check(name: &str, condition: &str, values: impl Iterator<Item = f64>) -> Check {
    let mut min = f64::INFINITY;
    let mut finite = true;
    for v in values {
        finite &= v.is_finite();
        min = min.min(v);
    }
    if min == f64::INFINITY {
        min = 0.0;
    }
    Check {
        name: name.into(),
        passed: finite && min >= 0.0,
        value: min,
        condition: condition.into(),
    }
}

fn integral_check(name: String, condition: &str, value: f64) -> Check {
    Check {
        name,
        passed: value.is_finite(),
        value,
        condition: condition.into(),
    }
}

/// Evaluates every admissibility condition. Admissibility failures are
/// reported in the returned report; only structural problems are errors.
pub fn validate(p: &AdmissibleParams) -> Result<ValidationReport> {
    p.check_dimensions()?;
    let d = p.d;
    let mut checks = vec![
        sign_check("c.nonnegative", "c_i >= 0", p.c.iter().copied()),
        sign_check("beta.nonnegative", "beta_i >= 0", p.beta.iter().copied()),
    ];
    let mut off_diag = sign_check(
        "B.essentially_nonnegative",
        "b_ij >= 0 for i != j",
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| p.b[(i, j)]),
    );
    // diagonal entries only need to be finite
    off_diag.passed &= p.b.iter().all(|v| v.is_finite());
    checks.push(off_diag);
    checks.push(integral_check(
        "nu.one_wedge_norm".into(),
        "int (1 ^ |z|) nu(dz) < inf",
        p.nu.moment_integral(MomentKind::OneWedgeNorm, 0, 0)?,
    ));
    checks.push(integral_check(
        "nu.large_norm".into(),
        "int |z| 1{|z| >= 1} nu(dz) < inf",
        p.nu.moment_integral(MomentKind::NormLarge, 0, 0)?,
    ));
    for (i, m) in p.mu.iter().enumerate() {
        checks.push(integral_check(
            format!("mu[{i}].norm_wedge_norm_sq"),
            "int (|z| ^ |z|^2) mu_i(dz) < inf",
            m.moment_integral(MomentKind::NormSqWedgeNorm, 0, 0)?,
        ));
        for j in (0..d).filter(|&j| j != i) {
            checks.push(integral_check(
                format!("mu[{i}].coord[{j}]"),
                "int z_j mu_i(dz) < inf for j != i",
                m.moment_integral(MomentKind::Coord, j, j)?,
            ));
        }
        checks.push(integral_check(
            format!("mu[{i}].large_norm"),
            "int |z| 1{|z| >= 1} mu_i(dz) < inf",
            m.moment_integral(MomentKind::NormLarge, 0, 0)?,
        ));
    }
    let ok = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { ok, checks })
}

/// Drift and jump rates of the simulation scheme in which every branching
/// and immigration jump is an actual event, with infinite-activity parts
/// truncated below `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTruncation {
    pub eps: f64,
    /// `β` plus the mean of the omitted small immigration jumps.
    pub beta: DVector<f64>,
    /// Drift matrix paired with the simulated jumps. Equals `B̂` when every
    /// measure has finite activity.
    pub matrix: DMatrix<f64>,
    /// `∫ z 1{‖z‖ < ε} ν(dz)` over the truncated parts.
    pub nu_small_mean: DVector<f64>,
    /// `∫ z 1{‖z‖ < ε} μ_j(dz)` over the truncated parts, per type (entries may be `+∞`).
    pub mu_small_mean: Vec<DVector<f64>>,
    /// Mass of the simulated part of `ν`.
    pub immigration_rate: f64,
    /// Mass of the simulated part of each `μ_j`.
    pub branching_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    /// `β̃ = β + ∫ z ν(dz)`
    pub beta_tilde: DVector<f64>,
    /// `b̃_ij = b_ij + ∫ (z_i − δ_ij)⁺ μ_j(dz)`
    pub b_tilde: DMatrix<f64>,
    /// `d_ij = b̃_ij − ∫ z_i 1{‖z‖ ≥ 1} μ_j(dz)`
    pub d: DMatrix<f64>,
    /// `B̂ = B − diag(∫ (1 ∧ z_i) μ_i(dz))`
    pub b_hat: DMatrix<f64>,
    pub truncation: JumpTruncation,
}

pub fn derive(p: &AdmissibleParams) -> Result<DerivedParams> {
    derive_with_eps(p, DEFAULT_EPS)
}

pub fn derive_with_eps(p: &AdmissibleParams, eps: f64) -> Result<DerivedParams> {
    p.check_dimensions()?;
    let d = p.d;
    let mut beta_tilde = p.beta.clone();
    for i in 0..d {
        beta_tilde[i] += p.nu.moment_integral(MomentKind::Coord, i, i)?;
    }
    let mut b_tilde = p.b.clone();
    let mut dm = DMatrix::zeros(d, d);
    let mut b_hat = p.b.clone();
    for j in 0..d {
        for i in 0..d {
            b_tilde[(i, j)] += p.mu[j].moment_integral(MomentKind::CoordMinusDeltaPlus, i, j)?;
            dm[(i, j)] = b_tilde[(i, j)] - p.mu[j].moment_integral(MomentKind::CoordLarge, i, j)?;
        }
        b_hat[(j, j)] -= p.mu[j].moment_integral(MomentKind::OneWedgeCoord, j, j)?;
    }
    let truncation = truncation(p, eps)?;
    Ok(DerivedParams {
        beta_tilde,
        b_tilde,
        d: dm,
        b_hat,
        truncation,
    })
}

fn truncation(p: &AdmissibleParams, eps: f64) -> Result<JumpTruncation> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(CbiError::InvalidConfig(format!(
            "truncation level must lie in (0, 1], got {eps}"
        )));
    }
    let d = p.d;
    let nu_small_mean = DVector::from_vec(p.nu.truncated_small_mean(eps)?);
    let beta = &p.beta + &nu_small_mean;
    let mut matrix = p.b.clone();
    let mut mu_small_mean = Vec::with_capacity(d);
    let mut branching_rates = Vec::with_capacity(d);
    for j in 0..d {
        let mu = &p.mu[j];
        matrix[(j, j)] -= mu.truncated_one_wedge_coord(eps, j)?;
        let small = DVector::from_vec(mu.truncated_small_mean(eps)?);
        // Omitted jumps of type j move other coordinates; their mean is folded
        // into the drift. Along axis j the compensation already matches.
        for i in (0..d).filter(|&i| i != j) {
            matrix[(i, j)] += small[i];
        }
        mu_small_mean.push(small);
        branching_rates.push(truncated_mass(mu, eps)?);
    }
    Ok(JumpTruncation {
        eps,
        beta,
        matrix,
        nu_small_mean,
        mu_small_mean,
        immigration_rate: truncated_mass(&p.nu, eps)?,
        branching_rates,
    })
}

fn truncated_mass(m: &JumpMeasure, eps: f64) -> Result<f64> {
    if m.is_zero() {
        return Ok(0.0);
    }
    match m.truncated_sampler(eps) {
        Ok(s) => Ok(s.mass()),
        Err(CbiError::EmptyRegion) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Validated parameters bundled with their derived quantities.
#[derive(Debug, Clone)]
pub struct CbiModel {
    pub params: AdmissibleParams,
    pub derived: DerivedParams,
}

impl CbiModel {
    pub fn new(params: AdmissibleParams) -> Result<Self> {
        Self::with_eps(params, DEFAULT_EPS)
    }

    pub fn with_eps(params: AdmissibleParams, eps: f64) -> Result<Self> {
        let report = validate(&params)?;
        if !report.ok {
            let names: Vec<_> = report.failed().map(|c| c.name.clone()).collect();
            return Err(CbiError::NotAdmissible(names.join(", ")));
        }
        let derived = derive_with_eps(&params, eps)?;
        Ok(Self { params, derived })
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    /// The truncation data for `eps`, recomputed only when it differs from the cached one.
    pub fn truncation_for(&self, eps: f64) -> Result<std::borrow::Cow<'_, JumpTruncation>> {
        if eps == self.derived.truncation.eps {
            Ok(std::borrow::Cow::Borrowed(&self.derived.truncation))
        } else {
            Ok(std::borrow::Cow::Owned(truncation(&self.params, eps)?))
        }
    }
}

/// Mass of `region` of each branching measure; handy for reporting.
pub fn branching_masses(p: &AdmissibleParams, region: RegionTag) -> Result<Vec<f64>> {
    p.mu.iter().map(|m| m.total_mass(region)).collect()
}
