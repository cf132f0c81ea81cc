//! Monte Carlo estimators and the verification harness comparing simulated
//! paths with the closed-form mean and the Riccati Laplace transform.
//!
//! Path `i` of a run with seed `s` always uses ChaCha8 stream `i` of key `s`.
//! Paths are processed in fixed chunks whose statistics are merged in chunk
//! order, so results are bitwise independent of the number of threads.

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{dim_check, CbiError, Result};
use crate::io::{ser_f64, ser_vec_f64};
use crate::moments;
use crate::ode::Tolerances;
use crate::params::CbiModel;
use crate::riccati;
use crate::scenario::{BiasConstants, LaplacePoint, Scenario};
use crate::simulate::{SimConfig, Simulator};

/// Paths per work unit.
pub const CHUNK: usize = 256;

/// Pass threshold on the bias-adjusted z-score.
pub const Z_THRESHOLD: f64 = 3.0;

/// Largest accepted mean of `error(dt/2) / error(dt)` in the weak-order check.
pub const WEAK_ORDER_MAX_RATIO: f64 = 0.75;

/// Differences `X′ − X` below this count as comparison violations.
pub const VIOLATION_TOL: f64 = -1e-12;

pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Running mean and sum of squared deviations, merged with Chan's formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Welford {
    pub fn new(width: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * (nb / n);
            self.m2[i] += other.m2[i] + delta * delta * (na * nb / n);
        }
        self.n += other.n;
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|s| if self.n < 2 { f64::NAN } else { (s.max(0.0) / (n - 1.0) / n).sqrt() })
            .collect()
    }
}

/// Runs `f` over the chunks of `0..n_paths` in parallel and returns the
/// results in chunk order.
fn par_chunks<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> Result<T> + Sync,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(n_paths)))
        .collect()
}

/// Per-path statistics of width `width`, reduced deterministically.
fn path_statistics<F>(n_paths: usize, width: usize, f: F) -> Result<Welford>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let parts = par_chunks(n_paths, |range| {
        let mut w = Welford::new(width);
        let mut buf = vec![0.0; width];
        for i in range {
            f(i, &mut buf)?;
            w.push(&buf);
        }
        Ok(w)
    })?;
    let mut total = Welford::new(width);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    #[serde(serialize_with = "ser_vec_f64")]
    pub value: Vec<f64>,
    #[serde(serialize_with = "ser_vec_f64")]
    pub stderr: Vec<f64>,
    pub n_paths: usize,
    #[serde(serialize_with = "ser_f64")]
    pub dt: f64,
    pub seed: u64,
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(CbiError::InvalidConfig(format!("at least 2 paths are needed, got {n_paths}")));
    }
    Ok(())
}

/// Sample mean of `X_t`.
pub fn estimate_mean(
    model: &CbiModel,
    x0: &[f64],
    t: f64,
    n_paths: usize,
    cfg: SimConfig,
    seed: u64,
) -> Result<McEstimate> {
    check_paths(n_paths)?;
    let sim = Simulator::new(model, SimConfig { t_end: t, ..cfg })?;
    let last = sim.grid().len() - 1;
    let stats = path_statistics(n_paths, model.dim(), |i, buf| {
        let mut rng = path_rng(seed, i as u64);
        sim.run_observed(x0, &mut rng, |k, x| {
            if k == last {
                buf.copy_from_slice(x);
            }
        })
    })?;
    Ok(McEstimate {
        stderr: stats.stderr(),
        value: stats.mean,
        n_paths,
        dt: cfg.dt,
        seed,
    })
}

fn grid_index(grid: &[f64], t: f64) -> Result<usize> {
    grid.iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.max(1.0))
        .ok_or_else(|| CbiError::InvalidConfig(format!("time {t} is not on the simulation grid")))
}

/// Sample means of `exp(−⟨λ, X_t⟩)` for several `(t, λ)` from one set of paths.
pub fn estimate_laplace_points(
    model: &CbiModel,
    x0: &[f64],
    points: &[LaplacePoint],
    n_paths: usize,
    cfg: SimConfig,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    check_paths(n_paths)?;
    for p in points {
        dim_check("lambda", model.dim(), p.lambda.len())?;
    }
    let horizon = points.iter().map(|p| p.t).fold(0.0, f64::max);
    let sim = Simulator::new(model, SimConfig { t_end: horizon, ..cfg })?;
    let indices = points
        .iter()
        .map(|p| grid_index(sim.grid(), p.t))
        .collect::<Result<Vec<_>>>()?;
    let stats = path_statistics(n_paths, points.len(), |i, buf| {
        let mut rng = path_rng(seed, i as u64);
        sim.run_observed(x0, &mut rng, |k, x| {
            for (slot, (p, &idx)) in buf.iter_mut().zip(points.iter().zip(&indices)) {
                if idx == k {
                    let dot: f64 = p.lambda.iter().zip(x).map(|(l, v)| l * v).sum();
                    *slot = (-dot).exp();
                }
            }
        })
    })?;
    let se = stats.stderr();
    Ok((0..points.len())
        .map(|p| McEstimate {
            value: vec![stats.mean[p]],
            stderr: vec![se[p]],
            n_paths,
            dt: cfg.dt,
            seed,
        })
        .collect())
}

/// Sample mean of `exp(−⟨λ, X_t⟩)`.
pub fn estimate_laplace(
    model: &CbiModel,
    x0: &[f64],
    lam: &[f64],
    t: f64,
    n_paths: usize,
    cfg: SimConfig,
    seed: u64,
) -> Result<McEstimate> {
    let point = LaplacePoint { t, lambda: lam.to_vec() };
    let mut v = estimate_laplace_points(model, x0, &[point], n_paths, SimConfig { t_end: t, ..cfg }, seed)?;
    Ok(v.pop().unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyEntry {
    pub quantity: String,
    #[serde(serialize_with = "ser_f64")]
    pub analytic: f64,
    #[serde(serialize_with = "ser_f64")]
    pub estimate: f64,
    #[serde(serialize_with = "ser_f64")]
    pub stderr: f64,
    /// `(|estimate − analytic| − allowance)⁺ / stderr`.
    #[serde(serialize_with = "ser_f64")]
    pub z: f64,
    #[serde(serialize_with = "ser_f64")]
    pub allowance: f64,
    pub pass: bool,
}

impl VerifyEntry {
    pub fn new(quantity: String, analytic: f64, estimate: f64, stderr: f64, allowance: f64) -> Self {
        let excess = ((estimate - analytic).abs() - allowance).max(0.0);
        let z = if excess == 0.0 { 0.0 } else { excess / stderr };
        Self {
            quantity,
            analytic,
            estimate,
            stderr,
            z,
            allowance,
            pass: z <= Z_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonLevel {
    #[serde(serialize_with = "ser_f64")]
    pub dt: f64,
    pub n_paths: usize,
    /// Number of (path, grid point, component) triples inspected.
    pub triples: u64,
    pub violations: u64,
    #[serde(serialize_with = "ser_f64")]
    pub fraction: f64,
    /// Most negative `X′ − X` seen (0 when there is none).
    #[serde(serialize_with = "ser_f64")]
    pub worst_violation: f64,
    /// Smallest `mean(X′ − X) / stderr` over grid points and components.
    #[serde(serialize_with = "ser_f64")]
    pub min_mean_z: f64,
    pub means_ordered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub kind: String,
    pub scenario: String,
    pub n_paths: usize,
    #[serde(serialize_with = "ser_f64")]
    pub dt: f64,
    pub seed: u64,
    pub entries: Vec<VerifyEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<ComparisonLevel>,
    pub pass: bool,
    /// Wall-clock seconds; kept out of the serialized report so that reports are reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    /// Maximal number of simulated path-steps.
    pub budget: Option<u64>,
}

fn check_budget(needed: u64, budget: Option<u64>) -> Result<()> {
    match budget {
        Some(b) if needed > b => Err(CbiError::BudgetExceeded { needed, budget: b }),
        _ => Ok(()),
    }
}

fn steps(t: f64, dt: f64) -> u64 {
    SimConfig::new(t, dt).n_steps() as u64
}

pub fn verify_mean(scenario: &Scenario, opts: VerifyOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    let model = scenario.model()?;
    let n_paths = opts.n_paths.unwrap_or(scenario.n_paths);
    let dt = opts.dt.unwrap_or(scenario.dt);
    let seed = opts.seed.unwrap_or(scenario.seed);
    check_budget(n_paths as u64 * steps(scenario.t, dt), opts.budget)?;
    let est = estimate_mean(&model, &scenario.x0, scenario.t, n_paths, SimConfig::new(scenario.t, dt), seed)?;
    let exact = moments::mean(&model.derived, &DVector::from_column_slice(&scenario.x0), scenario.t)?;
    let entries: Vec<_> = (0..model.dim())
        .map(|i| {
            VerifyEntry::new(
                format!("E[X_{}(t={})]", i + 1, scenario.t),
                exact[i],
                est.value[i],
                est.stderr[i],
                scenario.bias.mean * dt,
            )
        })
        .collect();
    Ok(VerifyReport {
        kind: "mean".into(),
        scenario: scenario.name.clone(),
        n_paths,
        dt,
        seed,
        pass: entries.iter().all(|e| e.pass),
        entries,
        comparison: Vec::new(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn format_lambda(lam: &[f64]) -> String {
    let parts: Vec<String> = lam.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}

pub fn verify_laplace(scenario: &Scenario, opts: VerifyOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    if scenario.laplace_points.is_empty() {
        return Err(CbiError::InvalidConfig(format!("scenario {} has no Laplace points", scenario.name)));
    }
    let model = scenario.model()?;
    let n_paths = opts.n_paths.unwrap_or(scenario.n_paths);
    let dt = opts.dt.unwrap_or(scenario.dt);
    let seed = opts.seed.unwrap_or(scenario.seed);
    let horizon = scenario.laplace_points.iter().map(|p| p.t).fold(0.0, f64::max);
    check_budget(n_paths as u64 * steps(horizon, dt), opts.budget)?;
    let est = estimate_laplace_points(
        &model,
        &scenario.x0,
        &scenario.laplace_points,
        n_paths,
        SimConfig::new(horizon, dt),
        seed,
    )?;
    let entries = scenario
        .laplace_points
        .iter()
        .zip(&est)
        .map(|(p, e)| {
            let exact = riccati::laplace_transform(&model.params, &scenario.x0, &p.lambda, p.t, Tolerances::default())?;
            Ok(VerifyEntry::new(
                format!("L(t={}, lambda={})", p.t, format_lambda(&p.lambda)),
                exact,
                e.value[0],
                e.stderr[0],
                scenario.bias.laplace * dt,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        kind: "laplace".into(),
        scenario: scenario.name.clone(),
        n_paths,
        dt,
        seed,
        pass: entries.iter().all(|e| e.pass),
        entries,
        comparison: Vec::new(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

struct CoupledChunk {
    diff: Welford,
    violations: u64,
    worst: f64,
}

/// Coupled runs with `β′ = β + shift`, `X′_0 = X_0`.
pub fn comparison_level(
    model: &CbiModel,
    beta_prime: &[f64],
    x0: &[f64],
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ComparisonLevel> {
    check_paths(n_paths)?;
    let sim = Simulator::new(model, SimConfig::new(t, dt))?;
    let d = model.dim();
    let n_grid = sim.grid().len();
    let width = n_grid * d;
    let chunks = par_chunks(n_paths, |range| {
        let mut out = CoupledChunk {
            diff: Welford::new(width),
            violations: 0,
            worst: 0.0,
        };
        let mut buf = vec![0.0; width];
        for i in range {
            let mut rng = path_rng(seed, i as u64);
            sim.run_coupled_observed(beta_prime, x0, x0, &mut rng, |k, x, xp| {
                for c in 0..d {
                    let diff = xp[c] - x[c];
                    buf[k * d + c] = diff;
                    if diff < VIOLATION_TOL {
                        out.violations += 1;
                        out.worst = out.worst.min(diff);
                    }
                }
            })?;
            out.diff.push(&buf);
        }
        Ok(out)
    })?;
    let mut diff = Welford::new(width);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for c in &chunks {
        diff.merge(&c.diff);
        violations += c.violations;
        worst = worst.min(c.worst);
    }
    let se = diff.stderr();
    let mut min_z = f64::INFINITY;
    for (m, s) in diff.mean.iter().zip(&se) {
        let z = if *s > 0.0 {
            m / s
        } else if *m >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        min_z = min_z.min(z);
    }
    let triples = (n_paths * width) as u64;
    Ok(ComparisonLevel {
        dt,
        n_paths,
        triples,
        violations,
        fraction: violations as f64 / triples as f64,
        worst_violation: worst,
        min_mean_z: min_z,
        means_ordered: min_z >= -Z_THRESHOLD,
    })
}

/// Largest tolerated violation fraction at the coarser step.
pub const MAX_VIOLATION_FRACTION: f64 = 0.01;

pub fn verify_comparison(scenario: &Scenario, opts: VerifyOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    let model = scenario.model()?;
    let settings = scenario.comparison_settings();
    let n_paths = opts.n_paths.unwrap_or(settings.n_paths);
    let dt = opts.dt.unwrap_or(settings.dt);
    let seed = opts.seed.unwrap_or(scenario.seed);
    dim_check("beta_shift", model.dim(), settings.beta_shift.len())?;
    if settings.beta_shift.iter().any(|s| !(*s >= 0.0)) {
        return Err(CbiError::PreconditionViolated("beta_shift must be nonnegative".into()));
    }
    // two coupled paths per sample, at dt and dt/2
    check_budget(2 * n_paths as u64 * (steps(scenario.t, dt) + steps(scenario.t, dt / 2.0)), opts.budget)?;
    let beta_prime: Vec<f64> = model
        .params
        .beta
        .iter()
        .zip(&settings.beta_shift)
        .map(|(b, s)| b + s)
        .collect();
    let coarse = comparison_level(&model, &beta_prime, &scenario.x0, scenario.t, dt, n_paths, seed)?;
    let fine = comparison_level(&model, &beta_prime, &scenario.x0, scenario.t, dt / 2.0, n_paths, seed)?;
    let pass = coarse.fraction <= MAX_VIOLATION_FRACTION
        && fine.fraction <= coarse.fraction
        && coarse.means_ordered
        && fine.means_ordered;
    Ok(VerifyReport {
        kind: "comparison".into(),
        scenario: scenario.name.clone(),
        n_paths,
        dt,
        seed,
        entries: Vec::new(),
        comparison: vec![coarse, fine],
        pass,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakOrderReport {
    #[serde(serialize_with = "ser_f64")]
    pub dt: f64,
    pub n_paths_per_group: usize,
    /// `‖MC mean − exact‖` at `dt`, one per seed group.
    #[serde(serialize_with = "ser_vec_f64")]
    pub error_coarse: Vec<f64>,
    /// The same at `dt / 2`.
    #[serde(serialize_with = "ser_vec_f64")]
    pub error_fine: Vec<f64>,
    #[serde(serialize_with = "ser_vec_f64")]
    pub ratios: Vec<f64>,
    #[serde(serialize_with = "ser_f64")]
    pub mean_ratio: f64,
    pub pass: bool,
}

/// Error of the mean estimator at `dt` and `dt / 2` over independent seed groups.
pub fn weak_order(scenario: &Scenario, groups: usize, n_paths: usize, dt: f64) -> Result<WeakOrderReport> {
    if groups == 0 {
        return Err(CbiError::InvalidConfig("at least one seed group is needed".into()));
    }
    let model = scenario.model()?;
    let exact = moments::mean(&model.derived, &DVector::from_column_slice(&scenario.x0), scenario.t)?;
    let mut error_coarse = Vec::with_capacity(groups);
    let mut error_fine = Vec::with_capacity(groups);
    for g in 0..groups {
        let seed = scenario.seed.wrapping_add(1 + g as u64);
        let err = |h: f64| -> Result<f64> {
            let est = estimate_mean(&model, &scenario.x0, scenario.t, n_paths, SimConfig::new(scenario.t, h), seed)?;
            Ok(est.value.iter().zip(exact.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        };
        error_coarse.push(err(dt)?);
        error_fine.push(err(dt / 2.0)?);
    }
    let ratios: Vec<f64> = error_fine.iter().zip(&error_coarse).map(|(f, c)| f / c).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / groups as f64;
    Ok(WeakOrderReport {
        dt,
        n_paths_per_group: n_paths,
        error_coarse,
        error_fine,
        ratios,
        mean_ratio,
        pass: mean_ratio <= WEAK_ORDER_MAX_RATIO,
    })
}

/// Mean of the Euler scheme when the state never leaves the orthant:
/// `m ← m + (β̃ + B̃ m) h` on the simulation grid.
pub fn euler_mean_recursion(model: &CbiModel, x0: &[f64], t: f64, dt: f64) -> Result<DVector<f64>> {
    dim_check("x0", model.dim(), x0.len())?;
    let der = &model.derived;
    let grid = crate::simulate::time_grid(t, dt);
    let mut m = DVector::from_column_slice(x0);
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        m = &m + (&der.beta_tilde + &der.b_tilde * &m) * h;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub bias: BiasSerialized,
    /// `|Euler mean recursion − exact mean| / dt`, per component.
    #[serde(serialize_with = "ser_vec_f64")]
    pub recursion_mean_bias: Vec<f64>,
    /// `2 |m̂(dt) − m̂(dt/2)| / dt`, per component.
    #[serde(serialize_with = "ser_vec_f64")]
    pub richardson_mean_bias: Vec<f64>,
    /// The same for the Laplace estimator, per Laplace point.
    #[serde(serialize_with = "ser_vec_f64")]
    pub richardson_laplace_bias: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasSerialized {
    #[serde(serialize_with = "ser_f64")]
    pub mean: f64,
    #[serde(serialize_with = "ser_f64")]
    pub laplace: f64,
}

impl From<BiasSerialized> for BiasConstants {
    fn from(b: BiasSerialized) -> Self {
        BiasConstants {
            mean: b.mean,
            laplace: b.laplace,
        }
    }
}

/// Richardson estimate `2 |m̂(dt) − m̂(dt/2)| / dt` of the first-order bias constant.
fn richardson(coarse: f64, fine: f64, dt: f64) -> f64 {
    2.0 * (coarse - fine).abs() / dt
}

/// Rounds up to two significant digits.
fn round_up_2(v: f64) -> f64 {
    if v <= 0.0 || !v.is_finite() {
        return v.max(0.0);
    }
    let scale = 10f64.powi(v.log10().floor() as i32 - 1);
    (v / scale).ceil() * scale
}

/// Bias constants from a step-halving run on seeds disjoint from the
/// verification seed, combined with the Euler recursion bias of the mean.
pub fn calibrate(scenario: &Scenario, n_paths: usize, seed: u64) -> Result<Calibration> {
    let model = scenario.model()?;
    let dt = scenario.dt;
    let exact = moments::mean(&model.derived, &DVector::from_column_slice(&scenario.x0), scenario.t)?;
    let rec = euler_mean_recursion(&model, &scenario.x0, scenario.t, dt)?;
    let recursion_mean_bias: Vec<f64> = rec.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs() / dt).collect();
    let cfg = |h: f64| SimConfig::new(scenario.t, h);
    let coarse = estimate_mean(&model, &scenario.x0, scenario.t, n_paths, cfg(dt), seed)?;
    let fine = estimate_mean(&model, &scenario.x0, scenario.t, n_paths, cfg(dt / 2.0), seed)?;
    let richardson_mean_bias: Vec<f64> = (0..model.dim())
        .map(|i| richardson(coarse.value[i], fine.value[i], dt))
        .collect();
    let mut richardson_laplace_bias = Vec::new();
    if !scenario.laplace_points.is_empty() {
        let horizon = scenario.laplace_points.iter().map(|p| p.t).fold(0.0, f64::max);
        let points = &scenario.laplace_points;
        let lc = estimate_laplace_points(&model, &scenario.x0, points, n_paths, SimConfig::new(horizon, dt), seed)?;
        let lf = estimate_laplace_points(&model, &scenario.x0, points, n_paths, SimConfig::new(horizon, dt / 2.0), seed)?;
        richardson_laplace_bias = lc
            .iter()
            .zip(&lf)
            .map(|(a, b)| richardson(a.value[0], b.value[0], dt))
            .collect();
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let mean = max(&recursion_mean_bias).max(max(&richardson_mean_bias));
    Ok(Calibration {
        bias: BiasSerialized {
            mean: round_up_2(mean),
            laplace: round_up_2(max(&richardson_laplace_bias)),
        },
        recursion_mean_bias,
        richardson_mean_bias,
        richardson_laplace_bias,
        n_paths,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::AdmissibleParams;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn welford_merge_matches_single_pass() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.173).collect();
        let mut single = Welford::new(1);
        for &x in &data {
            single.push(&[x]);
        }
        let mut merged = Welford::new(1);
        for chunk in data.chunks(77) {
            let mut w = Welford::new(1);
            for &x in chunk {
                w.push(&[x]);
            }
            merged.merge(&w);
        }
        assert_eq!(merged.n, single.n);
        assert!((merged.mean[0] - single.mean[0]).abs() < 1e-12);
        assert!((merged.m2[0] - single.m2[0]).abs() < 1e-9 * single.m2[0]);
    }

    #[test]
    fn identical_values_have_zero_stderr() {
        let mut a = Welford::new(1);
        for _ in 0..10 {
            a.push(&[0.3]);
        }
        let mut b = a.clone();
        b.merge(&a);
        assert_eq!(b.mean[0], 0.3);
        assert_eq!(b.stderr()[0], 0.0);
    }

    #[test]
    fn deterministic_mean_estimate() {
        let m = CbiModel::new(AdmissibleParams::diffusion(dvector![0.0], dvector![1.0], dmatrix![0.0])).unwrap();
        let est = estimate_mean(&m, &[0.5], 1.0, 600, SimConfig::new(1.0, 1.0 / 64.0), 9).unwrap();
        assert!((est.value[0] - 1.5).abs() < 1e-12);
        assert_eq!(est.stderr[0], 0.0);
    }

    #[test]
    fn laplace_edge_cases_are_exact() {
        let m = CbiModel::new(AdmissibleParams::diffusion(dvector![1.0], dvector![1.0], dmatrix![-1.0])).unwrap();
        let cfg = SimConfig::new(1.0, 1.0 / 64.0);
        let zero = estimate_laplace(&m, &[1.0], &[0.0], 1.0, 300, cfg, 1).unwrap();
        assert_eq!((zero.value[0], zero.stderr[0]), (1.0, 0.0));
        let t0 = estimate_laplace(&m, &[1.0], &[2.0], 0.0, 300, cfg, 1).unwrap();
        assert_eq!((t0.value[0], t0.stderr[0]), ((-2.0f64).exp(), 0.0));
    }

    #[test]
    fn budget_is_enforced() {
        let s = Scenario::builtin("S1").unwrap();
        let opts = VerifyOptions {
            budget: Some(1000),
            ..Default::default()
        };
        assert!(matches!(verify_mean(&s, opts), Err(CbiError::BudgetExceeded { .. })));
    }

    #[test]
    fn z_score_semantics() {
        let e = VerifyEntry::new("q".into(), 1.0, 1.1, 0.01, 0.05);
        assert!((e.z - 5.0).abs() < 1e-9);
        assert!(!e.pass);
        let e = VerifyEntry::new("q".into(), 1.0, 1.0, 0.0, 0.0);
        assert_eq!(e.z, 0.0);
        assert!(e.pass);
    }

    #[test]
    fn rounding_up() {
        assert_eq!(round_up_2(0.0), 0.0);
        assert!((round_up_2(0.1234) - 0.13).abs() < 1e-12);
        assert!((round_up_2(47.01) - 48.0).abs() < 1e-9);
    }
}
