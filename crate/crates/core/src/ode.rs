//! Dormand–Prince 5(4) with PI step-size control and continuous output.
//!
//! The leading `nonneg` components of the state are known to stay
//! nonnegative; roundoff excursions below zero are clamped when tiny and
//! cause a rejected step otherwise.

use crate::error::{CbiError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

const MAX_STEPS: usize = 200_000;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous-output coefficients of one accepted step.
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    t0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

impl Segment {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
        }
    }
}

/// Accepted steps of an integration from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    /// Step endpoints, starting at 0.
    pub t: Vec<f64>,
    /// State at each entry of `t`.
    pub y: Vec<Vec<f64>>,
    segments: Vec<Segment>,
}

impl OdeSolution {
    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn last(&self) -> &[f64] {
        self.y.last().unwrap()
    }

    /// Interpolated state at `t ∈ [0, t_end]`; exact node values at the nodes.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y[0].len()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        // index of the first node ≥ t
        let k = self.t.partition_point(|&s| s < t);
        if k < self.t.len() && self.t[k] == t {
            out.copy_from_slice(&self.y[k]);
        } else if k == 0 {
            out.copy_from_slice(&self.y[0]);
        } else if k == self.t.len() {
            out.copy_from_slice(self.last());
        } else {
            self.segments[k - 1].eval_into(t, out);
        }
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], tol: Tolerances) -> f64 {
    let n = y0.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let sc = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `y(0) = y0` to `t_end`.
pub fn dopri5<F>(mut f: F, y0: &[f64], t_end: f64, tol: Tolerances, nonneg: usize) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let mut sol = OdeSolution {
        t: vec![0.0],
        y: vec![y0.to_vec()],
        segments: Vec::new(),
    };
    if t_end == 0.0 {
        return Ok(sol);
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CbiError::InvalidConfig(format!("integration horizon must be positive, got {t_end}")));
    }

    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut y = y0.to_vec();
    let mut y1 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut errv = vec![0.0; n];
    f(0.0, &y, &mut k[0])?;

    let mut h = initial_step(&mut f, &y, &k[0], t_end, tol)?;
    let mut t = 0.0;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;

    for _ in 0..MAX_STEPS {
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(CbiError::StepSizeUnderflow {
                t,
                reason: format!("step size {h:e} below resolution"),
            });
        }

        stage(&y, h, &[(A21, 0)], &k, &mut ys);
        f(t + C2 * h, &ys, &mut k[1])?;
        stage(&y, h, &[(A31, 0), (A32, 1)], &k, &mut ys);
        f(t + C3 * h, &ys, &mut k[2])?;
        stage(&y, h, &[(A41, 0), (A42, 1), (A43, 2)], &k, &mut ys);
        f(t + C4 * h, &ys, &mut k[3])?;
        stage(&y, h, &[(A51, 0), (A52, 1), (A53, 2), (A54, 3)], &k, &mut ys);
        f(t + C5 * h, &ys, &mut k[4])?;
        stage(&y, h, &[(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)], &k, &mut ys);
        let t_new = if last { t_end } else { t + h };
        f(t_new, &ys, &mut k[5])?;
        stage(&y, h, &[(A71, 0), (A73, 2), (A74, 3), (A75, 4), (A76, 5)], &k, &mut y1);
        f(t_new, &y1, &mut k[6])?;
        for i in 0..n {
            errv[i] = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        }
        let err = error_norm(&y, &y1, &errv, tol);
        if !err.is_finite() {
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        let mut negative = false;
        for v in y1.iter_mut().take(nonneg) {
            if *v < 0.0 {
                if *v > -10.0 * tol.atol {
                    *v = 0.0;
                } else {
                    negative = true;
                }
            }
        }

        let fac11 = err.powf(expo1);
        if negative {
            h *= 0.5;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(beta) / 0.9).clamp(0.1, 5.0);
            facold = err.max(1e-4);
            let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - h * k[6][i] - bspl;
                rcont[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            // after clamping, the endpoint derivative must match the clamped state
            if y1.iter().take(nonneg).any(|&v| v == 0.0) {
                f(t_new, &y1, &mut k[6])?;
            }
            sol.segments.push(Segment { t0: t, h, rcont });
            t = t_new;
            y.copy_from_slice(&y1);
            sol.t.push(t);
            sol.y.push(y.clone());
            k.swap(0, 6);
            if last {
                return Ok(sol);
            }
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            h /= (fac11 / 0.9).min(5.0);
            last_rejected = true;
        }
    }
    Err(CbiError::StepSizeUnderflow {
        t,
        reason: format!("more than {MAX_STEPS} steps required"),
    })
}

fn stage(y: &[f64], h: f64, coeffs: &[(f64, usize)], k: &[Vec<f64>; 7], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for &(a, s) in coeffs {
            acc += a * k[s][i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn initial_step<F>(f: &mut F, y: &[f64], f0: &[f64], t_end: f64, tol: Tolerances) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(t_end);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / m).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(t_end))
}
