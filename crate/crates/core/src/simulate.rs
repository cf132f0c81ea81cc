//! Euler scheme for the jump SDE in which every jump above the truncation
//! level is an actual event.
//!
//! Per step of length `h` starting from `X` (with `X⁺` its positive part):
//!
//! * drift and diffusion: `X ← X + (β_s + B_s X⁺) h + √(2 c_i X_i⁺ h) ξ_i e_i`;
//! * immigration: `Poisson(ν_ε · h)` jumps drawn from `ν` above the cutoff;
//! * branching of type `j`: candidate points `(z, u)` with `u` uniform on
//!   `[0, U_j]` at rate `U_j μ_j,ε h`, accepted iff `u ≤ X_j⁺`.
//!
//! `U_j = X_j⁺` for a single path and the larger of the two values for a
//! coupled pair, so both members of a pair see the same Gaussian increments
//! and the same candidate points. `β_s`, `B_s` come from
//! [`JumpTruncation`](crate::params::JumpTruncation).

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{dim_check, CbiError, Result};
use crate::measures::MeasureSampler;
use crate::params::{CbiModel, DEFAULT_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositivityMode {
    /// Positive parts inside the coefficients only; the state itself may dip below 0.
    #[default]
    PositivePart,
    /// Additionally project the state onto the nonnegative orthant after every step.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub eps_trunc: f64,
    pub positivity: PositivityMode,
    pub record_jumps: bool,
}

impl SimConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            eps_trunc: DEFAULT_EPS,
            positivity: PositivityMode::default(),
            record_jumps: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CbiError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(CbiError::InvalidConfig(format!("horizon must be nonnegative, got {}", self.t_end)));
        }
        if !(self.eps_trunc > 0.0 && self.eps_trunc <= 1.0) {
            return Err(CbiError::InvalidConfig(format!(
                "truncation level must lie in (0, 1], got {}",
                self.eps_trunc
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        time_grid(self.t_end, self.dt).len() - 1
    }
}

/// `0, dt, 2dt, …` up to `t_end`, the last step possibly shorter.
pub fn time_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let ratio = t_end / dt;
    let mut n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        n = ratio.ceil();
    }
    let n = n as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    grid.push(t_end);
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Immigration,
    /// Branching jump of the given type (0-based) with `‖z‖ < 1`.
    BranchingSmall(usize),
    /// Branching jump of the given type (0-based) with `‖z‖ ≥ 1`.
    BranchingLarge(usize),
}

impl JumpKind {
    pub fn label(&self) -> &'static str {
        match self {
            JumpKind::Immigration => "immigration",
            JumpKind::BranchingSmall(_) => "branching_small",
            JumpKind::BranchingLarge(_) => "branching_large",
        }
    }

    /// 1-based branching type, 0 for immigration.
    pub fn type_column(&self) -> usize {
        match self {
            JumpKind::Immigration => 0,
            JumpKind::BranchingSmall(j) | JumpKind::BranchingLarge(j) => j + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    /// Right endpoint of the step in which the jump occurred.
    pub t: f64,
    pub kind: JumpKind,
    pub z: Vec<f64>,
    /// Thinning coordinate; 0 for immigration.
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub jumps: Vec<JumpEvent>,
}

impl Path {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

struct Branching {
    rate: f64,
    sampler: MeasureSampler,
}

/// Precomputed coefficients and samplers shared by all paths of a run.
pub struct Simulator {
    d: usize,
    cfg: SimConfig,
    grid: Vec<f64>,
    beta: Vec<f64>,
    nu_small_mean: Vec<f64>,
    /// Row-major drift matrix.
    matrix: Vec<f64>,
    sigma: Vec<f64>,
    immigration: Option<Branching>,
    branching: Vec<Option<Branching>>,
}

fn sampler_or_none(m: &crate::measures::JumpMeasure, eps: f64) -> Result<Option<Branching>> {
    if m.is_zero() {
        return Ok(None);
    }
    match m.truncated_sampler(eps) {
        Ok(sampler) => Ok(Some(Branching {
            rate: sampler.mass(),
            sampler,
        })),
        Err(CbiError::EmptyRegion) => Ok(None),
        Err(e) => Err(e),
    }
}

struct Scratch {
    xplus: Vec<Vec<f64>>,
    xi: Vec<f64>,
    z: Vec<f64>,
}

impl Simulator {
    pub fn new(model: &CbiModel, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let p = &model.params;
        let d = p.d;
        let tr = model.truncation_for(cfg.eps_trunc)?;
        let mut matrix = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                matrix.push(tr.matrix[(i, j)]);
            }
        }
        let branching = p
            .mu
            .iter()
            .map(|m| sampler_or_none(m, cfg.eps_trunc))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            d,
            cfg,
            grid: time_grid(cfg.t_end, cfg.dt),
            beta: tr.beta.iter().copied().collect(),
            nu_small_mean: tr.nu_small_mean.iter().copied().collect(),
            matrix,
            sigma: p.c.iter().map(|c| (2.0 * c).sqrt()).collect(),
            immigration: sampler_or_none(&p.nu, cfg.eps_trunc)?,
            branching,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn check_start(&self, x0: &[f64]) -> Result<()> {
        dim_check("x0", self.d, x0.len())?;
        if x0.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(CbiError::PreconditionViolated("initial state must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Runs one path, calling `observe(k, x)` at every grid index `k`.
    pub fn run_observed<R, F>(&self, x0: &[f64], rng: &mut R, mut observe: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &[f64]),
    {
        self.check_start(x0)?;
        let mut xs = vec![x0.to_vec()];
        let betas = [self.beta.as_slice()];
        self.run(&mut xs, &betas, rng, None, |k, xs| observe(k, &xs[0]))
    }

    /// Runs a coupled pair, calling `observe(k, x, x′)` at every grid index `k`.
    pub fn run_coupled_observed<R, F>(
        &self,
        beta_prime: &[f64],
        x0: &[f64],
        x0_prime: &[f64],
        rng: &mut R,
        mut observe: F,
    ) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &[f64], &[f64]),
    {
        let bp = self.coupled_precondition(beta_prime, x0, x0_prime)?;
        let mut xs = vec![x0.to_vec(), x0_prime.to_vec()];
        let betas = [self.beta.as_slice(), bp.as_slice()];
        self.run(&mut xs, &betas, rng, None, |k, xs| observe(k, &xs[0], &xs[1]))
    }

    pub fn simulate_path<R: Rng + ?Sized>(&self, x0: &[f64], rng: &mut R) -> Result<Path> {
        self.check_start(x0)?;
        let mut xs = vec![x0.to_vec()];
        let betas = [self.beta.as_slice()];
        let mut states = Vec::with_capacity(self.grid.len());
        let mut jumps = vec![Vec::new()];
        let record = self.cfg.record_jumps.then_some(jumps.as_mut_slice());
        self.run(&mut xs, &betas, rng, record, |_, xs| states.push(xs[0].clone()))?;
        Ok(Path {
            grid: self.grid.clone(),
            states,
            jumps: jumps.pop().unwrap(),
        })
    }

    pub fn simulate_coupled<R: Rng + ?Sized>(
        &self,
        beta_prime: &[f64],
        x0: &[f64],
        x0_prime: &[f64],
        rng: &mut R,
    ) -> Result<(Path, Path)> {
        let bp = self.coupled_precondition(beta_prime, x0, x0_prime)?;
        let mut xs = vec![x0.to_vec(), x0_prime.to_vec()];
        let betas = [self.beta.as_slice(), bp.as_slice()];
        let mut states = [Vec::new(), Vec::new()];
        let mut jumps = vec![Vec::new(), Vec::new()];
        let record = self.cfg.record_jumps.then_some(jumps.as_mut_slice());
        self.run(&mut xs, &betas, rng, record, |_, xs| {
            states[0].push(xs[0].clone());
            states[1].push(xs[1].clone());
        })?;
        let [s0, s1] = states;
        let j1 = jumps.pop().unwrap();
        let j0 = jumps.pop().unwrap();
        Ok((
            Path {
                grid: self.grid.clone(),
                states: s0,
                jumps: j0,
            },
            Path {
                grid: self.grid.clone(),
                states: s1,
                jumps: j1,
            },
        ))
    }

    /// Validates the ordering and returns the simulation drift for `β′`.
    fn coupled_precondition(&self, beta_prime: &[f64], x0: &[f64], x0_prime: &[f64]) -> Result<Vec<f64>> {
        self.check_start(x0)?;
        self.check_start(x0_prime)?;
        dim_check("beta_prime", self.d, beta_prime.len())?;
        let beta: Vec<f64> = self.beta.iter().zip(&self.nu_small_mean).map(|(b, m)| b - m).collect();
        for i in 0..self.d {
            if !(beta_prime[i] >= beta[i]) {
                return Err(CbiError::PreconditionViolated(format!(
                    "beta' must dominate beta (component {} has {} < {})",
                    i + 1,
                    beta_prime[i],
                    beta[i]
                )));
            }
            if !(x0_prime[i] >= x0[i]) {
                return Err(CbiError::PreconditionViolated(format!(
                    "x0' must dominate x0 (component {} has {} < {})",
                    i + 1,
                    x0_prime[i],
                    x0[i]
                )));
            }
        }
        Ok(beta_prime.iter().zip(&self.nu_small_mean).map(|(b, m)| b + m).collect())
    }

    fn run<R, F>(
        &self,
        xs: &mut [Vec<f64>],
        betas: &[&[f64]],
        rng: &mut R,
        mut jumps: Option<&mut [Vec<JumpEvent>]>,
        mut observe: F,
    ) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &[Vec<f64>]),
    {
        let mut scratch = Scratch {
            xplus: vec![vec![0.0; self.d]; xs.len()],
            xi: vec![0.0; self.d],
            z: vec![0.0; self.d],
        };
        observe(0, xs);
        for k in 1..self.grid.len() {
            let h = self.grid[k] - self.grid[k - 1];
            self.step(xs, betas, self.grid[k], h, rng, &mut scratch, jumps.as_deref_mut())?;
            observe(k, xs);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn step<R: Rng + ?Sized>(
        &self,
        xs: &mut [Vec<f64>],
        betas: &[&[f64]],
        t_next: f64,
        h: f64,
        rng: &mut R,
        scratch: &mut Scratch,
        mut jumps: Option<&mut [Vec<JumpEvent>]>,
    ) -> Result<()> {
        let d = self.d;
        for (x, xp) in xs.iter().zip(scratch.xplus.iter_mut()) {
            for i in 0..d {
                xp[i] = x[i].max(0.0);
            }
        }
        for i in 0..d {
            scratch.xi[i] = if self.sigma[i] > 0.0 {
                rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
        }
        for ((x, xp), beta) in xs.iter_mut().zip(&scratch.xplus).zip(betas) {
            for i in 0..d {
                let row = &self.matrix[i * d..(i + 1) * d];
                let drift = beta[i] + row.iter().zip(xp.iter()).map(|(a, b)| a * b).sum::<f64>();
                x[i] += drift * h;
                if self.sigma[i] > 0.0 {
                    x[i] += self.sigma[i] * (xp[i] * h).sqrt() * scratch.xi[i];
                }
            }
        }

        if let Some(imm) = &self.immigration {
            let n = poisson(imm.rate * h, rng)?;
            for _ in 0..n {
                imm.sampler.sample_into(rng, &mut scratch.z);
                for x in xs.iter_mut() {
                    for i in 0..d {
                        x[i] += scratch.z[i];
                    }
                }
                if let Some(log) = jumps.as_deref_mut() {
                    for l in log.iter_mut() {
                        l.push(JumpEvent {
                            t: t_next,
                            kind: JumpKind::Immigration,
                            z: scratch.z.clone(),
                            u: 0.0,
                        });
                    }
                }
            }
        }

        for (j, br) in self.branching.iter().enumerate() {
            let Some(br) = br else { continue };
            let bound = scratch.xplus.iter().map(|xp| xp[j]).fold(0.0, f64::max);
            if bound == 0.0 {
                continue;
            }
            let n = poisson(bound * br.rate * h, rng)?;
            for _ in 0..n {
                br.sampler.sample_into(rng, &mut scratch.z);
                let u = bound * (1.0 - rng.random::<f64>());
                for (idx, (x, xp)) in xs.iter_mut().zip(&scratch.xplus).enumerate() {
                    if u <= xp[j] {
                        for i in 0..d {
                            x[i] += scratch.z[i];
                        }
                        if let Some(log) = jumps.as_deref_mut() {
                            let norm = scratch.z.iter().map(|v| v * v).sum::<f64>().sqrt();
                            let kind = if norm < 1.0 {
                                JumpKind::BranchingSmall(j)
                            } else {
                                JumpKind::BranchingLarge(j)
                            };
                            log[idx].push(JumpEvent {
                                t: t_next,
                                kind,
                                z: scratch.z.clone(),
                                u,
                            });
                        }
                    }
                }
            }
        }

        if self.cfg.positivity == PositivityMode::Clamp {
            for x in xs.iter_mut() {
                for v in x.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        Ok(())
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| CbiError::InvalidConfig(format!("jump intensity {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

pub fn simulate_path<R: Rng + ?Sized>(model: &CbiModel, x0: &[f64], cfg: SimConfig, rng: &mut R) -> Result<Path> {
    Simulator::new(model, cfg)?.simulate_path(x0, rng)
}

pub fn simulate_coupled<R: Rng + ?Sized>(
    model: &CbiModel,
    beta_prime: &[f64],
    x0: &[f64],
    x0_prime: &[f64],
    cfg: SimConfig,
    rng: &mut R,
) -> Result<(Path, Path)> {
    Simulator::new(model, cfg)?.simulate_coupled(beta_prime, x0, x0_prime, rng)
}

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `t,x1,...,xd` followed by one row per grid point.
pub fn write_path_csv<W: Write>(path: &Path, mut w: W) -> std::io::Result<()> {
    let d = path.states.first().map_or(0, |s| s.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d).map(|i| format!("x{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (t, x) in path.grid.iter().zip(&path.states) {
        let row: Vec<String> = std::iter::once(*t).chain(x.iter().copied()).map(fmt17).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Header `t,kind,type,z1,...,zd,u`; `type` is 1-based and 0 for immigration.
pub fn write_jumps_csv<W: Write>(path: &Path, d: usize, mut w: W) -> std::io::Result<()> {
    let mut header = vec!["t".to_string(), "kind".to_string(), "type".to_string()];
    header.extend((1..=d).map(|i| format!("z{i}")));
    header.push("u".to_string());
    writeln!(w, "{}", header.join(","))?;
    for e in &path.jumps {
        let mut row = vec![fmt17(e.t), e.kind.label().to_string(), e.kind.type_column().to_string()];
        row.extend(e.z.iter().map(|&v| fmt17(v)));
        row.push(fmt17(e.u));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atom, JumpMeasure, MeasurePart};
    use crate::params::AdmissibleParams;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deterministic(beta: f64, b: f64) -> CbiModel {
        CbiModel::new(AdmissibleParams::diffusion(dvector![0.0], dvector![beta], dmatrix![b])).unwrap()
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(time_grid(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(time_grid(1.0, 0.4), vec![0.0, 0.4, 0.8, 1.0]);
        assert_eq!(time_grid(0.0, 0.1), vec![0.0]);
        assert_eq!(time_grid(1.0, 0.1).len(), 11);
    }

    #[test]
    fn constant_drift_is_exact() {
        let m = deterministic(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let path = simulate_path(&m, &[0.5], SimConfig::new(1.0, 1.0 / 64.0), &mut rng).unwrap();
        for (t, x) in path.grid.iter().zip(&path.states) {
            assert!((x[0] - (0.5 + t)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coefficients_keep_the_state() {
        let m = deterministic(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let path = simulate_path(&m, &[2.5], SimConfig::new(2.0, 0.1), &mut rng).unwrap();
        assert!(path.states.iter().all(|x| x[0] == 2.5));
    }

    #[test]
    fn clamp_keeps_states_nonnegative() {
        let m = CbiModel::new(AdmissibleParams::diffusion(dvector![2.0], dvector![0.0], dmatrix![-1.0])).unwrap();
        let mut cfg = SimConfig::new(2.0, 0.05);
        cfg.positivity = PositivityMode::Clamp;
        let sim = Simulator::new(&m, cfg).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path = sim.simulate_path(&[0.1], &mut rng).unwrap();
            assert!(path.states.iter().all(|x| x[0] >= 0.0));
        }
    }

    #[test]
    fn identical_inputs_give_identical_coupled_paths() {
        let mut p = AdmissibleParams::diffusion(dvector![0.5], dvector![0.3], dmatrix![-0.5]);
        p.mu[0] = JumpMeasure::new(1, vec![MeasurePart::DiscreteAtoms(vec![Atom { z: vec![0.4], w: 2.0 }])]).unwrap();
        let m = CbiModel::new(p).unwrap();
        let mut cfg = SimConfig::new(1.0, 0.01);
        cfg.record_jumps = true;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, b) = simulate_coupled(&m, &[0.3], &[1.0], &[1.0], cfg, &mut rng).unwrap();
        assert_eq!(a, b);
        assert!(!a.jumps.is_empty());
        // a single path with the same stream reproduces the pair
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let single = simulate_path(&m, &[1.0], cfg, &mut rng).unwrap();
        assert_eq!(single, a);
    }

    #[test]
    fn coupling_preconditions() {
        let m = deterministic(1.0, 0.0);
        let cfg = SimConfig::new(1.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            simulate_coupled(&m, &[0.5], &[0.0], &[0.0], cfg, &mut rng),
            Err(CbiError::PreconditionViolated(_))
        ));
        assert!(matches!(
            simulate_coupled(&m, &[1.0], &[1.0], &[0.5], cfg, &mut rng),
            Err(CbiError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn deterministic_coupling_difference() {
        let m = deterministic(0.0, -0.7);
        let cfg = SimConfig::new(1.0, 1.0 / 1024.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = simulate_coupled(&m, &[1.0], &[0.5], &[0.5], cfg, &mut rng).unwrap();
        // Euler for the difference δ' = −0.7 δ + 1 started at 0
        let mut delta = 0.0;
        for k in 0..a.grid.len() {
            assert!((b.states[k][0] - a.states[k][0] - delta).abs() < 1e-12);
            assert!(b.states[k][0] >= a.states[k][0]);
            delta += (1.0 - 0.7 * delta) / 1024.0;
        }
    }

    #[test]
    fn thinning_log_respects_state() {
        let mut p = AdmissibleParams::diffusion(dvector![0.0], dvector![0.0], dmatrix![0.0]);
        p.mu[0] = JumpMeasure::new(1, vec![MeasurePart::DiscreteAtoms(vec![Atom { z: vec![1.5], w: 1.0 }])]).unwrap();
        let m = CbiModel::new(p).unwrap();
        let mut cfg = SimConfig::new(1.0, 0.01);
        cfg.record_jumps = true;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = simulate_path(&m, &[2.0], cfg, &mut rng).unwrap();
        assert!(!path.jumps.is_empty());
        for e in &path.jumps {
            assert_eq!(e.kind, JumpKind::BranchingLarge(0));
            let k = path.grid.iter().position(|&t| t == e.t).unwrap();
            assert!(e.u > 0.0 && e.u <= path.states[k - 1][0]);
        }
    }

    #[test]
    fn invalid_configs() {
        let m = deterministic(1.0, 0.0);
        let mut cfg = SimConfig::new(1.0, 0.0);
        assert!(matches!(Simulator::new(&m, cfg), Err(CbiError::InvalidConfig(_))));
        cfg.dt = 0.1;
        cfg.eps_trunc = 1.5;
        assert!(matches!(Simulator::new(&m, cfg), Err(CbiError::InvalidConfig(_))));
    }

    #[test]
    fn csv_layout() {
        let m = deterministic(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let path = simulate_path(&m, &[0.0], SimConfig::new(0.5, 0.25), &mut rng).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&path, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines[2], "2.5000000000000000e-1,2.5000000000000000e-1");
        let mut buf = Vec::new();
        write_jumps_csv(&path, 1, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,kind,type,z1,u\n");
    }
}
