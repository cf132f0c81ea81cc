//! Adaptive Gauss–Kronrod quadrature and the special-purpose integrators the
//! jump measures need: semi-infinite ranges and integrands with a power-law
//! singularity at the origin (where the integral may diverge).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{CbiError, Result};

/// Tolerances and interval budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_intervals: 1_000_000,
        }
    }
}

impl QuadSettings {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_atol(mut self, atol: f64) -> Self {
        self.atol = atol;
        self
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod / 7-point Gauss panel. Returns (kronrod, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let s = f(center - dx) + f(center + dx);
        kronrod += w * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, settings: QuadSettings) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, settings).map(|v| -v);
    }
    let (value, error) = gk15(&f, a, b);
    if !value.is_finite() {
        return Err(CbiError::QuadratureFailure(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut intervals = 1usize;
    while total_err > settings.atol.max(settings.rtol * total.abs()) {
        if intervals >= settings.max_intervals {
            return Err(CbiError::QuadratureFailure(format!(
                "interval budget {} exhausted on [{a}, {b}] (estimate {total}, error {total_err})",
                settings.max_intervals
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point; keep it as converged.
            total_err -= worst.error;
            heap.push(Panel { error: 0.0, ..worst });
            if heap.iter().all(|p| p.error == 0.0) {
                break;
            }
            continue;
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        if !(lv.is_finite() && rv.is_finite()) {
            return Err(CbiError::QuadratureFailure(format!(
                "non-finite integrand on [{}, {}]",
                worst.a, worst.b
            )));
        }
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re });
        intervals += 1;
        if intervals.is_multiple_of(64) {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Integrates `f` over `[a, ∞)`; `scale` is the length over which `f` decays.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    settings: QuadSettings,
) -> Result<f64> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - t;
        let z = a + scale * t / one_minus;
        let v = f(z) * scale / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, settings)
}

/// Integrates `f` over `[a, b]` with `0 < a < b`, in the variable `ln z`.
pub fn integrate_log<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, settings: QuadSettings) -> Result<f64> {
    debug_assert!(a > 0.0 && b > 0.0);
    integrate(
        |u: f64| {
            let z = u.exp();
            f(z) * z
        },
        a.ln(),
        b.ln(),
        settings,
    )
}

/// Result of integrating towards a possibly non-integrable singularity at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OriginIntegral {
    Finite(f64),
    Divergent,
}

impl OriginIntegral {
    /// The value, with divergence mapped to `+∞` (or `-∞` for negative integrands).
    pub fn value_or_inf(self, sign: f64) -> f64 {
        match self {
            OriginIntegral::Finite(v) => v,
            OriginIntegral::Divergent => sign.signum() * f64::INFINITY,
        }
    }
}

/// Cutoff ratio between successive inner cutoffs.
const ORIGIN_SHRINK: f64 = 1.0 / 16.0;
/// Segment ratios at or above this are read as non-decaying, i.e. divergence.
const ORIGIN_DIVERGENT_RATIO: f64 = 1.0 - 1e-6;
/// Consecutive ratios must agree to this tolerance before the tail is extrapolated.
const ORIGIN_RATIO_STABLE: f64 = 1e-10;
const ORIGIN_MAX_SEGMENTS: usize = 60;

/// Integrates `f` over `(0, b]` for an integrand that behaves like a power
/// `z^p` near the origin.
///
/// The interval is cut at `b·q^n` with `q = 1/16`; each segment is integrated
/// in `ln z`. Once three consecutive segment ratios agree (the pure power-law
/// regime) the remaining tail is a geometric series: it is summed in closed
/// form when the ratio is below one and reported as [`OriginIntegral::Divergent`]
/// otherwise.
pub fn integrate_from_origin<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    settings: QuadSettings,
) -> Result<OriginIntegral> {
    let seg_settings = QuadSettings {
        rtol: 1e-13,
        atol: 0.0,
        max_intervals: settings.max_intervals,
    };
    let mut total = 0.0;
    let mut hi = b;
    let mut prev: Option<f64> = None;
    let mut ratios: Vec<f64> = Vec::new();
    let mut zero_run = 0;
    for _ in 0..ORIGIN_MAX_SEGMENTS {
        let lo = hi * ORIGIN_SHRINK;
        let seg = integrate_log(&f, lo, hi, seg_settings)?;
        total += seg;
        hi = lo;
        if seg == 0.0 {
            zero_run += 1;
            if zero_run >= 3 {
                return Ok(OriginIntegral::Finite(total));
            }
            prev = None;
            ratios.clear();
            continue;
        }
        zero_run = 0;
        if let Some(p) = prev {
            ratios.push(seg / p);
        }
        prev = Some(seg);
        let n = ratios.len();
        if n >= 3 {
            let (r0, r1, r2) = (ratios[n - 3], ratios[n - 2], ratios[n - 1]);
            let stable = (r2 - r1).abs() <= ORIGIN_RATIO_STABLE * r2.abs().max(1.0)
                && (r1 - r0).abs() <= ORIGIN_RATIO_STABLE * r2.abs().max(1.0);
            if stable {
                if r2 >= ORIGIN_DIVERGENT_RATIO {
                    return Ok(OriginIntegral::Divergent);
                }
                let tail = seg * r2 / (1.0 - r2);
                return Ok(OriginIntegral::Finite(total + tail));
            }
        }
        if seg.abs() <= f64::MIN_POSITIVE {
            return Ok(OriginIntegral::Finite(total));
        }
    }
    Err(CbiError::QuadratureFailure(format!(
        "segment ratios near the origin did not settle within {ORIGIN_MAX_SEGMENTS} cutoffs (partial sum {total})"
    )))
}

/// `e^{-s} - 1 + s`, accurate for small `s`.
pub fn exp_neg_minus_one_plus(s: f64) -> f64 {
    if s.abs() < 1.0 {
        // Alternating series sum_{k>=2} (-s)^k / k!.
        let mut term = s * s / 2.0;
        let mut sum = term;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs() {
            k += 1.0;
            term *= -s / k;
            sum += term;
        }
        sum
    } else {
        (-s).exp_m1() + s
    }
}

/// `∫_a^b ρ^n e^{-cρ} dρ` for integer `n ≥ 0`, `c > 0`, `0 ≤ a < b ≤ ∞`.
pub fn radial_gamma(n: u32, c: f64, a: f64, b: f64) -> f64 {
    let switch = n as f64 + 1.0;
    if c * b < switch {
        lower_gamma_scaled(n, c, b) - lower_gamma_scaled(n, c, a)
    } else if c * a >= switch {
        upper_gamma_scaled(n, c, a) - upper_gamma_scaled(n, c, b)
    } else {
        factorial(n) / c.powi(n as i32 + 1) - lower_gamma_scaled(n, c, a) - upper_gamma_scaled(n, c, b)
    }
}

/// `∫_a^∞ ρ^n e^{-cρ} dρ`.
fn upper_gamma_scaled(n: u32, c: f64, a: f64) -> f64 {
    if a.is_infinite() {
        return 0.0;
    }
    if a == 0.0 {
        return factorial(n) / c.powi(n as i32 + 1);
    }
    let x = c * a;
    if x < n as f64 + 1.0 {
        // Complement of the lower incomplete gamma, which has a positive series.
        let total = factorial(n) / c.powi(n as i32 + 1);
        total - lower_gamma_scaled(n, c, a)
    } else {
        // n! e^{-x} sum_{k<=n} x^k/k!  /  c^{n+1}
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=n {
            term *= x / k as f64;
            sum += term;
        }
        factorial(n) * (-x).exp() * sum / c.powi(n as i32 + 1)
    }
}

/// `∫_0^a ρ^n e^{-cρ} dρ` via `γ(s, x) = x^s e^{-x} Σ_j x^j / (s (s+1) ... (s+j))`.
fn lower_gamma_scaled(n: u32, c: f64, a: f64) -> f64 {
    let x = c * a;
    let s = n as f64 + 1.0;
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut j = 0.0;
    while term > 1e-17 * sum {
        j += 1.0;
        term *= x / (s + j);
        sum += term;
    }
    // x^s e^{-x} sum / c^s = a^s e^{-x} sum
    a.powf(s) * (-x).exp() * sum
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}
