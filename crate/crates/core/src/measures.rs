//! Jump measures on `U_d = ℝ₊^d ∖ {0}`.
//!
//! A [`JumpMeasure`] is a finite sum of parametric parts (atoms, product
//! exponential densities, tempered power laws on a coordinate axis). Every
//! integral the model needs is available per part, exactly where a closed form
//! exists and by adaptive quadrature otherwise; integrals that diverge are
//! reported as `+∞`. Norms are Euclidean throughout.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;

use crate::error::{dim_check, CbiError, Result};
use crate::quadrature::{
    exp_neg_minus_one_plus, integrate, integrate_from_origin, integrate_log,
    integrate_to_infinity, radial_gamma, QuadSettings,
};

/// Region of `U_d` a mass or a sample is restricted to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionTag {
    All,
    /// `‖z‖ < 1`
    SmallJumps,
    /// `‖z‖ ≥ 1`
    LargeJumps,
    /// `‖z‖ ≥ ε`
    AboveEps(f64),
}

impl RegionTag {
    pub fn contains_norm(&self, norm: f64) -> bool {
        match *self {
            RegionTag::All => true,
            RegionTag::SmallJumps => norm < 1.0,
            RegionTag::LargeJumps => norm >= 1.0,
            RegionTag::AboveEps(eps) => norm >= eps,
        }
    }

    /// Radial range `[lo, hi)` covered by the region.
    fn radial_range(&self) -> (f64, f64) {
        match *self {
            RegionTag::All => (0.0, f64::INFINITY),
            RegionTag::SmallJumps => (0.0, 1.0),
            RegionTag::LargeJumps => (1.0, f64::INFINITY),
            RegionTag::AboveEps(eps) => (eps.max(0.0), f64::INFINITY),
        }
    }
}

/// Integrands of the moment-type integrals used by validation and by the
/// modified parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `∫ (1 ∧ ‖z‖)`
    OneWedgeNorm,
    /// `∫ ‖z‖ 1{‖z‖ ≥ 1}`
    NormLarge,
    /// `∫ z_i 1{‖z‖ ≥ 1}`
    CoordLarge,
    /// `∫ z_i 1{‖z‖ < 1}`
    CoordSmall,
    /// `∫ (z_i − δ_ij)⁺`
    CoordMinusDeltaPlus,
    /// `∫ (1 ∧ z_i)`
    OneWedgeCoord,
    /// `∫ ‖z‖² 1{‖z‖ < 1}`
    NormSqSmall,
    /// `∫ z_i`
    Coord,
    /// `∫ (‖z‖ ∧ ‖z‖²)`
    NormSqWedgeNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub z: Vec<f64>,
    pub w: f64,
}

/// `C z^{-1-α} e^{-θ z} dz` placed on coordinate axis `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperedAxis {
    pub axis: usize,
    pub alpha: f64,
    pub theta: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurePart {
    DiscreteAtoms(Vec<Atom>),
    /// Density `mass · ∏ θ_k e^{-θ_k z_k}` on `(0, ∞)^d`.
    ProductExponential { mass: f64, rates: Vec<f64> },
    TemperedPowerLawAxis(TemperedAxis),
}

impl MeasurePart {
    pub fn is_finite_activity(&self) -> bool {
        !matches!(self, MeasurePart::TemperedPowerLawAxis(_))
    }
}

/// A Borel measure on `U_d`, stored as a finite sum of parametric parts.
/// An empty part list is the zero measure.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure {
    dim: usize,
    parts: Vec<MeasurePart>,
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x − ln(1 + x)` without cancellation.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // Σ_{k≥2} (−1)^k x^k / k
        let mut pow = x;
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            k += 1.0;
            pow *= -x;
            let add = -pow / k;
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x - x.ln_1p()
    }
}

impl JumpMeasure {
    pub fn zero(dim: usize) -> Self {
        Self { dim, parts: Vec::new() }
    }

    pub fn new(dim: usize, parts: Vec<MeasurePart>) -> Result<Self> {
        if dim == 0 {
            return Err(CbiError::InvalidMeasure("dimension must be positive".into()));
        }
        for part in &parts {
            match part {
                MeasurePart::DiscreteAtoms(atoms) => {
                    for atom in atoms {
                        dim_check("atom location", dim, atom.z.len())?;
                        if !(atom.w > 0.0 && atom.w.is_finite()) {
                            return Err(CbiError::InvalidMeasure(format!(
                                "atom weight must be positive and finite, got {}",
                                atom.w
                            )));
                        }
                        if atom.z.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                            return Err(CbiError::InvalidMeasure(format!(
                                "atom {:?} is not in the nonnegative orthant",
                                atom.z
                            )));
                        }
                        if atom.z.iter().all(|x| *x == 0.0) {
                            return Err(CbiError::InvalidMeasure("atom at the origin".into()));
                        }
                    }
                }
                MeasurePart::ProductExponential { mass, rates } => {
                    dim_check("product exponential rates", dim, rates.len())?;
                    if !(*mass > 0.0 && mass.is_finite()) {
                        return Err(CbiError::InvalidMeasure(format!(
                            "product exponential mass must be positive, got {mass}"
                        )));
                    }
                    if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                        return Err(CbiError::InvalidMeasure(format!(
                            "product exponential rates must be positive, got {rates:?}"
                        )));
                    }
                }
                MeasurePart::TemperedPowerLawAxis(t) => {
                    if t.axis >= dim {
                        return Err(CbiError::InvalidMeasure(format!(
                            "tempered power law axis {} out of range for dimension {dim}",
                            t.axis
                        )));
                    }
                    for (name, v) in [("alpha", t.alpha), ("theta", t.theta), ("scale", t.scale)] {
                        if !(v > 0.0 && v.is_finite()) {
                            return Err(CbiError::InvalidMeasure(format!(
                                "tempered power law {name} must be positive, got {v}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { dim, parts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parts(&self) -> &[MeasurePart] {
        &self.parts
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_finite_activity(&self) -> bool {
        self.parts.iter().all(MeasurePart::is_finite_activity)
    }

    fn check_lambda(&self, lam: &[f64]) -> Result<()> {
        dim_check("lambda", self.dim, lam.len())
    }

    /// Mass of `region`; `+∞` exactly when the defining integral diverges.
    pub fn total_mass(&self, region: RegionTag) -> Result<f64> {
        self.parts.iter().map(|p| part_mass(p, self.dim, region)).sum()
    }

    /// One of the moment integrals listed in [`MomentKind`]. `i` is the
    /// coordinate index, `j` the column index of `δ_ij` (only used by
    /// [`MomentKind::CoordMinusDeltaPlus`]).
    pub fn moment_integral(&self, kind: MomentKind, i: usize, j: usize) -> Result<f64> {
        if i >= self.dim || j >= self.dim {
            return Err(CbiError::DimensionMismatch {
                what: "moment index".into(),
                expected: self.dim,
                found: i.max(j) + 1,
            });
        }
        self.parts
            .iter()
            .map(|p| part_moment(p, self.dim, kind, i, j))
            .sum()
    }

    /// `∫ (e^{-⟨λ,z⟩} − 1 + λ_i (1 ∧ z_i)) m(dz)`.
    pub fn exp_branching_integral(&self, lam: &[f64], i: usize) -> Result<f64> {
        self.check_lambda(lam)?;
        self.parts.iter().map(|p| part_exp_branching(p, lam, i)).sum()
    }

    /// `∫ (1 − e^{-⟨λ,z⟩}) m(dz)`.
    pub fn exp_immigration_integral(&self, lam: &[f64]) -> Result<f64> {
        self.check_lambda(lam)?;
        self.parts.iter().map(|p| part_exp_immigration(p, lam)).sum()
    }

    /// `∫ (e^{-⟨λ,z⟩} − 1 + ⟨λ,z⟩) m(dz)`.
    pub fn compensated_exp_integral(&self, lam: &[f64]) -> Result<f64> {
        self.check_lambda(lam)?;
        self.parts.iter().map(|p| part_compensated_exp(p, lam)).sum()
    }

    /// `∫ (1 ∧ z_j)` over the jumps that are simulated as events when the
    /// infinite-activity parts are truncated below `eps`.
    pub fn truncated_one_wedge_coord(&self, eps: f64, j: usize) -> Result<f64> {
        self.parts
            .iter()
            .map(|p| match p {
                MeasurePart::TemperedPowerLawAxis(t) if t.axis == j => {
                    t.integrate_split(eps, f64::INFINITY, |z| z.min(1.0), |_| 1.0)
                }
                MeasurePart::TemperedPowerLawAxis(_) => Ok(0.0),
                _ => part_moment(p, self.dim, MomentKind::OneWedgeCoord, j, j),
            })
            .sum()
    }

    /// `∫ z 1{‖z‖ < eps}` over the infinite-activity parts, i.e. the mean of
    /// the jumps a truncated simulation omits. Entries may be `+∞`.
    pub fn truncated_small_mean(&self, eps: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        for p in &self.parts {
            if let MeasurePart::TemperedPowerLawAxis(t) = p {
                out[t.axis] += t.integrate_split(0.0, eps.min(1.0), |z| z, |z| z)?;
            }
        }
        Ok(out)
    }

    /// Sampler for the normalized restriction of the measure to `region`.
    pub fn sampler(&self, region: RegionTag) -> Result<MeasureSampler> {
        MeasureSampler::new(self, |_| region)
    }

    /// Sampler that draws every finite-activity part over all of `U_d` and
    /// the infinite-activity parts above the truncation level `eps`.
    pub fn truncated_sampler(&self, eps: f64) -> Result<MeasureSampler> {
        MeasureSampler::new(self, |p| {
            if p.is_finite_activity() {
                RegionTag::All
            } else {
                RegionTag::AboveEps(eps)
            }
        })
    }

    /// One draw from the normalized restriction to `region`. Builds a fresh
    /// sampler; use [`JumpMeasure::sampler`] for repeated draws.
    pub fn sample<R: Rng + ?Sized>(&self, region: RegionTag, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.sampler(region)?.sample(rng))
    }
}

impl TemperedAxis {
    pub fn density(&self, z: f64) -> f64 {
        self.scale * z.powf(-1.0 - self.alpha) * (-self.theta * z).exp()
    }

    /// `∫_lo^hi h(z) density(z) dz`, where `h = small` on `z < 1` and
    /// `h = large` on `z ≥ 1`. Returns `±∞` when the integral diverges at 0.
    pub fn integrate_split<S, L>(&self, lo: f64, hi: f64, small: S, large: L) -> Result<f64>
    where
        S: Fn(f64) -> f64,
        L: Fn(f64) -> f64,
    {
        let settings = QuadSettings::default();
        let mut total = 0.0;
        let small_hi = hi.min(1.0);
        if lo < small_hi {
            let f = |z: f64| small(z) * self.density(z);
            if lo == 0.0 {
                let sign = small(1e-3);
                total += integrate_from_origin(f, small_hi, settings)?.value_or_inf(sign);
            } else {
                total += integrate_log(f, lo, small_hi, settings)?;
            }
        }
        let large_lo = lo.max(1.0);
        if hi > large_lo {
            let f = |z: f64| large(z) * self.density(z);
            if hi.is_infinite() {
                total += integrate_to_infinity(f, large_lo, 1.0 / self.theta, settings)?;
            } else {
                total += integrate(f, large_lo, hi, settings)?;
            }
        }
        Ok(total)
    }

    fn integrate_region<H: Fn(f64) -> f64 + Copy>(&self, region: RegionTag, h: H) -> Result<f64> {
        let (lo, hi) = region.radial_range();
        self.integrate_split(lo, hi, h, h)
    }
}

fn part_mass(part: &MeasurePart, dim: usize, region: RegionTag) -> Result<f64> {
    match part {
        MeasurePart::DiscreteAtoms(atoms) => Ok(atoms
            .iter()
            .filter(|a| region.contains_norm(norm(&a.z)))
            .map(|a| a.w)
            .sum()),
        MeasurePart::ProductExponential { mass, rates } => {
            if region == RegionTag::All {
                return Ok(*mass);
            }
            let (lo, hi) = region.radial_range();
            product_exp_radial(*mass, rates, dim, 0, |_| 1.0, lo, hi)
        }
        MeasurePart::TemperedPowerLawAxis(t) => t.integrate_region(region, |_| 1.0),
    }
}

/// `mass ∏θ ∫_{orthant} w(ω) ∫_lo^hi ρ^{m + d − 1} e^{-ρ⟨θ,ω⟩} dρ dω` in
/// hyperspherical coordinates, i.e. the integral of `ρ^m w(ω)` against the
/// product exponential density over `lo ≤ ‖z‖ < hi`.
fn product_exp_radial<W: Fn(&[f64]) -> f64>(
    mass: f64,
    rates: &[f64],
    dim: usize,
    m: u32,
    w: W,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let prefactor = mass * rates.iter().product::<f64>();
    let n = m + dim as u32 - 1;
    let f = |omega: &[f64]| {
        let c = dot(rates, omega);
        w(omega) * radial_gamma(n, c, lo, hi)
    };
    Ok(prefactor * orthant_angular(dim, &f)?)
}

/// Integral of `f(ω)` over the unit sphere in the nonnegative orthant
/// (surface measure), by nested adaptive quadrature over the hyperspherical angles.
fn orthant_angular<F: Fn(&[f64]) -> f64>(dim: usize, f: &F) -> Result<f64> {
    fn nest<F: Fn(&[f64]) -> f64>(
        dim: usize,
        level: usize,
        sin_prod: f64,
        prefix: &[f64],
        f: &F,
    ) -> Result<f64> {
        if level == dim - 1 {
            let mut omega = prefix.to_vec();
            omega.push(sin_prod);
            return Ok(f(&omega));
        }
        let power = (dim - 2 - level) as i32;
        // Inner levels run tighter so their error does not stall the outer ones.
        let settings = QuadSettings::default().with_rtol(1e-10 * 1e-2f64.powi(level as i32 + 1));
        integrate(
            |phi: f64| {
                let (s, c) = phi.sin_cos();
                let mut p = prefix.to_vec();
                p.push(sin_prod * c);
                match nest(dim, level + 1, sin_prod * s, &p, f) {
                    Ok(v) => v * s.powi(power),
                    Err(_) => f64::NAN,
                }
            },
            0.0,
            FRAC_PI_2,
            if level == 0 {
                QuadSettings::default()
            } else {
                settings
            },
        )
    }
    if dim == 1 {
        return Ok(f(&[1.0]));
    }
    nest(dim, 0, 1.0, &[], f)
}

fn part_moment(part: &MeasurePart, dim: usize, kind: MomentKind, i: usize, j: usize) -> Result<f64> {
    use MomentKind::*;
    match part {
        MeasurePart::DiscreteAtoms(atoms) => Ok(atoms
            .iter()
            .map(|a| {
                let n = norm(&a.z);
                let zi = a.z[i];
                let g = match kind {
                    OneWedgeNorm => n.min(1.0),
                    NormLarge => if n >= 1.0 { n } else { 0.0 },
                    CoordLarge => if n >= 1.0 { zi } else { 0.0 },
                    CoordSmall => if n < 1.0 { zi } else { 0.0 },
                    CoordMinusDeltaPlus => (zi - if i == j { 1.0 } else { 0.0 }).max(0.0),
                    OneWedgeCoord => zi.min(1.0),
                    NormSqSmall => if n < 1.0 { n * n } else { 0.0 },
                    Coord => zi,
                    NormSqWedgeNorm => n.min(n * n),
                };
                a.w * g
            })
            .sum()),
        MeasurePart::ProductExponential { mass, rates } => {
            let th = rates[i];
            let coord = |o: &[f64]| o[i];
            let one = |_: &[f64]| 1.0;
            match kind {
                Coord => Ok(mass / th),
                OneWedgeCoord => Ok(mass * -(-th).exp_m1() / th),
                CoordMinusDeltaPlus => {
                    if i == j {
                        Ok(mass * (-th).exp() / th)
                    } else {
                        Ok(mass / th)
                    }
                }
                OneWedgeNorm => Ok(product_exp_radial(*mass, rates, dim, 1, one, 0.0, 1.0)?
                    + product_exp_radial(*mass, rates, dim, 0, one, 1.0, f64::INFINITY)?),
                NormLarge => product_exp_radial(*mass, rates, dim, 1, one, 1.0, f64::INFINITY),
                CoordLarge => product_exp_radial(*mass, rates, dim, 1, coord, 1.0, f64::INFINITY),
                CoordSmall => product_exp_radial(*mass, rates, dim, 1, coord, 0.0, 1.0),
                NormSqSmall => product_exp_radial(*mass, rates, dim, 2, one, 0.0, 1.0),
                NormSqWedgeNorm => Ok(product_exp_radial(*mass, rates, dim, 2, one, 0.0, 1.0)?
                    + product_exp_radial(*mass, rates, dim, 1, one, 1.0, f64::INFINITY)?),
            }
        }
        MeasurePart::TemperedPowerLawAxis(t) => {
            let on_axis = i == t.axis;
            let id = |z: f64| z;
            let zero = |_: f64| 0.0;
            let inf = f64::INFINITY;
            match kind {
                OneWedgeNorm => t.integrate_split(0.0, inf, id, |_| 1.0),
                NormLarge => t.integrate_split(1.0, inf, zero, id),
                NormSqSmall => t.integrate_split(0.0, 1.0, |z| z * z, zero),
                NormSqWedgeNorm => t.integrate_split(0.0, inf, |z| z * z, id),
                _ if !on_axis => Ok(0.0),
                CoordLarge => t.integrate_split(1.0, inf, zero, id),
                CoordSmall => t.integrate_split(0.0, 1.0, id, zero),
                CoordMinusDeltaPlus => {
                    if i == j {
                        t.integrate_split(1.0, inf, zero, |z| z - 1.0)
                    } else {
                        t.integrate_split(0.0, inf, id, id)
                    }
                }
                OneWedgeCoord => t.integrate_split(0.0, inf, id, |_| 1.0),
                Coord => t.integrate_split(0.0, inf, id, id),
            }
        }
    }
}

fn part_exp_branching(part: &MeasurePart, lam: &[f64], i: usize) -> Result<f64> {
    if lam.iter().all(|&l| l == 0.0) {
        return Ok(0.0);
    }
    match part {
        MeasurePart::DiscreteAtoms(atoms) => Ok(atoms
            .iter()
            .map(|a| {
                let s = dot(lam, &a.z);
                // e^{-s} - 1 + λ_i(1∧z_i) = g(s) - [Σ_{k≠i} λ_k z_k + λ_i (z_i - 1)⁺]
                let rest: f64 = lam
                    .iter()
                    .zip(&a.z)
                    .enumerate()
                    .map(|(k, (l, z))| if k == i { l * (z - 1.0).max(0.0) } else { l * z })
                    .sum();
                a.w * (exp_neg_minus_one_plus(s) - rest)
            })
            .sum()),
        MeasurePart::ProductExponential { mass, rates } => {
            let log_p: f64 = lam.iter().zip(rates).map(|(l, th)| -(l / th).ln_1p()).sum();
            let th = rates[i];
            Ok(mass * (log_p.exp_m1() + lam[i] * -(-th).exp_m1() / th))
        }
        MeasurePart::TemperedPowerLawAxis(t) => {
            let la = lam[t.axis];
            if la == 0.0 {
                return Ok(0.0);
            }
            if t.axis == i {
                t.integrate_split(
                    0.0,
                    f64::INFINITY,
                    |z| exp_neg_minus_one_plus(la * z),
                    |z| (-la * z).exp_m1() + la,
                )
            } else {
                let h = |z: f64| (-la * z).exp_m1();
                t.integrate_split(0.0, f64::INFINITY, h, h)
            }
        }
    }
}

fn part_exp_immigration(part: &MeasurePart, lam: &[f64]) -> Result<f64> {
    if lam.iter().all(|&l| l == 0.0) {
        return Ok(0.0);
    }
    match part {
        MeasurePart::DiscreteAtoms(atoms) => Ok(atoms
            .iter()
            .map(|a| a.w * -(-dot(lam, &a.z)).exp_m1())
            .sum()),
        MeasurePart::ProductExponential { mass, rates } => {
            let log_p: f64 = lam.iter().zip(rates).map(|(l, th)| -(l / th).ln_1p()).sum();
            Ok(mass * -log_p.exp_m1())
        }
        MeasurePart::TemperedPowerLawAxis(t) => {
            let la = lam[t.axis];
            if la == 0.0 {
                return Ok(0.0);
            }
            let h = |z: f64| -(-la * z).exp_m1();
            t.integrate_split(0.0, f64::INFINITY, h, h)
        }
    }
}

fn part_compensated_exp(part: &MeasurePart, lam: &[f64]) -> Result<f64> {
    if lam.iter().all(|&l| l == 0.0) {
        return Ok(0.0);
    }
    match part {
        MeasurePart::DiscreteAtoms(atoms) => Ok(atoms
            .iter()
            .map(|a| a.w * exp_neg_minus_one_plus(dot(lam, &a.z)))
            .sum()),
        MeasurePart::ProductExponential { mass, rates } => {
            // P − 1 + Σx_k with x_k = λ_k/θ_k and L = ln P = −Σ ln(1 + x_k):
            // (e^L − 1 − L) + Σ (x_k − ln(1 + x_k)), both terms nonnegative.
            let xs: Vec<f64> = lam.iter().zip(rates).map(|(l, th)| l / th).collect();
            let log_p: f64 = xs.iter().map(|x| -x.ln_1p()).sum();
            let rest: f64 = xs.iter().map(|&x| x_minus_log1p(x)).sum();
            Ok(mass * (exp_neg_minus_one_plus(-log_p) + rest))
        }
        MeasurePart::TemperedPowerLawAxis(t) => {
            let la = lam[t.axis];
            if la == 0.0 {
                return Ok(0.0);
            }
            let h = |z: f64| exp_neg_minus_one_plus(la * z);
            t.integrate_split(0.0, f64::INFINITY, h, h)
        }
    }
}

/// Tabulated inverse CDF of a tempered power law restricted to `[lo, ∞)`.
///
/// The CDF is computed cell by cell on a logarithmic grid; within a cell,
/// `ln z` is a monotone cubic Hermite function of the CDF value whose node
/// slopes come from the exact density.
#[derive(Debug, Clone)]
struct InverseCdfTable {
    log_z: Vec<f64>,
    cdf: Vec<f64>,
    // Fritsch–Carlson limited slopes d(ln z)/dF at the left and right end of each cell.
    slopes: Vec<(f64, f64)>,
}

const TABLE_CELLS: usize = 1024;

impl InverseCdfTable {
    fn build(t: &TemperedAxis, lo: f64, mass: f64) -> Result<Self> {
        let hi = lo + 60.0 / t.theta;
        let (wl, wh) = (lo.ln(), hi.ln());
        let log_z: Vec<f64> = (0..=TABLE_CELLS)
            .map(|k| wl + (wh - wl) * k as f64 / TABLE_CELLS as f64)
            .collect();
        let settings = QuadSettings::default().with_rtol(1e-12);
        let mut cdf = Vec::with_capacity(TABLE_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..TABLE_CELLS {
            acc += integrate(
                |w: f64| {
                    let z = w.exp();
                    t.density(z) * z
                },
                log_z[k],
                log_z[k + 1],
                settings,
            )?;
            cdf.push(acc);
        }
        let total = acc;
        debug_assert!((total - mass).abs() <= 1e-8 * mass.max(1e-300));
        for c in &mut cdf {
            *c /= total;
        }
        *cdf.last_mut().expect("nonempty") = 1.0;
        let node_slope = |w: f64| {
            let z = w.exp();
            total / (t.density(z) * z)
        };
        let slopes = (0..TABLE_CELLS)
            .map(|k| {
                let df = cdf[k + 1] - cdf[k];
                if df <= 0.0 {
                    return (0.0, 0.0);
                }
                let secant = (log_z[k + 1] - log_z[k]) / df;
                let mut a = node_slope(log_z[k]) / secant;
                let mut b = node_slope(log_z[k + 1]) / secant;
                if !a.is_finite() {
                    a = 3.0;
                }
                if !b.is_finite() {
                    b = 3.0;
                }
                let r = (a * a + b * b).sqrt();
                if r > 3.0 {
                    a *= 3.0 / r;
                    b *= 3.0 / r;
                }
                (a * secant, b * secant)
            })
            .collect();
        Ok(Self { log_z, cdf, slopes })
    }

    fn invert(&self, u: f64) -> f64 {
        let k = (self.cdf.partition_point(|&c| c <= u).max(1) - 1).min(TABLE_CELLS - 1);
        let (f0, f1) = (self.cdf[k], self.cdf[k + 1]);
        let (w0, w1) = (self.log_z[k], self.log_z[k + 1]);
        let h = f1 - f0;
        if h <= 0.0 {
            return w0.exp();
        }
        let s = ((u - f0) / h).clamp(0.0, 1.0);
        let (m0, m1) = self.slopes[k];
        let s2 = s * s;
        let s3 = s2 * s;
        let w = (2.0 * s3 - 3.0 * s2 + 1.0) * w0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * w1
            + (s3 - s2) * h * m1;
        w.clamp(w0, w1).exp()
    }
}

#[derive(Debug, Clone)]
enum PartSampler {
    Atoms { cumulative: Vec<f64>, points: Vec<Vec<f64>> },
    ProductExp { rates: Vec<f64>, region: RegionTag },
    Tempered { axis: usize, table: InverseCdfTable },
}

/// Draws from a normalized, region-restricted jump measure. Immutable and
/// shareable across threads once built.
#[derive(Debug, Clone)]
pub struct MeasureSampler {
    dim: usize,
    total: f64,
    cumulative: Vec<f64>,
    parts: Vec<PartSampler>,
}

impl MeasureSampler {
    fn new<F: Fn(&MeasurePart) -> RegionTag>(measure: &JumpMeasure, region_of: F) -> Result<Self> {
        let mut total = 0.0;
        let mut cumulative = Vec::new();
        let mut parts = Vec::new();
        for part in &measure.parts {
            let region = region_of(part);
            let mass = part_mass(part, measure.dim, region)?;
            if mass.is_infinite() {
                return Err(CbiError::InfiniteMass);
            }
            if mass <= 0.0 {
                continue;
            }
            let sampler = match part {
                MeasurePart::DiscreteAtoms(atoms) => {
                    let mut acc = 0.0;
                    let mut cum = Vec::new();
                    let mut points = Vec::new();
                    for a in atoms.iter().filter(|a| region.contains_norm(norm(&a.z))) {
                        acc += a.w;
                        cum.push(acc);
                        points.push(a.z.clone());
                    }
                    PartSampler::Atoms { cumulative: cum, points }
                }
                MeasurePart::ProductExponential { rates, .. } => PartSampler::ProductExp {
                    rates: rates.clone(),
                    region,
                },
                MeasurePart::TemperedPowerLawAxis(t) => {
                    let (lo, _) = region.radial_range();
                    PartSampler::Tempered {
                        axis: t.axis,
                        table: InverseCdfTable::build(t, lo, mass)?,
                    }
                }
            };
            total += mass;
            cumulative.push(total);
            parts.push(sampler);
        }
        if parts.is_empty() {
            return Err(CbiError::EmptyRegion);
        }
        Ok(Self {
            dim: measure.dim,
            total,
            cumulative,
            parts,
        })
    }

    /// Mass of the region the sampler draws from (the Poisson rate per unit time).
    pub fn mass(&self) -> f64 {
        self.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        self.sample_into(rng, &mut z);
        z
    }

    /// Writes one draw into `z` (length `dim`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64]) {
        let part = if self.parts.len() == 1 {
            &self.parts[0]
        } else {
            let u = rng.random::<f64>() * self.total;
            let k = self.cumulative.partition_point(|&c| c <= u).min(self.parts.len() - 1);
            &self.parts[k]
        };
        match part {
            PartSampler::Atoms { cumulative, points } => {
                let k = if points.len() == 1 {
                    0
                } else {
                    let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                    cumulative.partition_point(|&c| c <= u).min(points.len() - 1)
                };
                z.copy_from_slice(&points[k]);
            }
            PartSampler::ProductExp { rates, region } => loop {
                for (zk, th) in z.iter_mut().zip(rates) {
                    let u = 1.0 - rng.random::<f64>();
                    *zk = -u.ln() / th;
                }
                if region.contains_norm(norm(z)) {
                    break;
                }
            },
            PartSampler::Tempered { axis, table } => {
                z.iter_mut().for_each(|v| *v = 0.0);
                z[*axis] = table.invert(rng.random::<f64>());
            }
        }
    }
}
