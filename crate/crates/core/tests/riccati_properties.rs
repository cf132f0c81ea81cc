mod common;

use cbi_core::measures::{JumpMeasure, MeasurePart, TemperedAxis};
use cbi_core::nalgebra::{dmatrix, dvector};
use cbi_core::ode::Tolerances;
use cbi_core::params::derive;
use cbi_core::riccati::{laplace_transform, phi, phi_compensated, psi, solve_v};
use cbi_core::{validate, AdmissibleParams};
use common::random_atom_params;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_phi_forms_agree(p: &AdmissibleParams, lam: &[f64], rtol: f64) {
    let der = derive(p).unwrap();
    let a = phi(p, lam).unwrap();
    let b = phi_compensated(p, &der, lam).unwrap();
    for i in 0..p.d {
        let scale = a[i].abs().max(b[i].abs()).max(1.0);
        assert!((a[i] - b[i]).abs() <= rtol * scale, "φ_{i}: {} vs {} at λ = {lam:?}", a[i], b[i]);
    }
}

#[test]
fn phi_forms_agree_on_random_atom_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let p = random_atom_params(&mut rng, d);
        assert!(validate(&p).unwrap().ok);
        let lam: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..5.0)).collect();
        assert_phi_forms_agree(&p, &lam, 1e-10);
    }
}

#[test]
fn phi_forms_agree_on_continuous_families() {
    let mut p = AdmissibleParams::diffusion(dvector![0.4, 0.0], dvector![0.2, 0.1], dmatrix![-1.0, 0.3; 0.5, -0.2]);
    p.mu[0] = JumpMeasure::new(2, vec![MeasurePart::ProductExponential { mass: 1.3, rates: vec![1.5, 4.0] }]).unwrap();
    p.mu[1] = JumpMeasure::new(
        2,
        vec![MeasurePart::TemperedPowerLawAxis(TemperedAxis { axis: 1, alpha: 0.7, theta: 1.1, scale: 0.4 })],
    )
    .unwrap();
    for lam in [[0.0, 0.0], [0.3, 0.0], [0.0, 2.0], [1.7, 0.9], [6.0, 4.5]] {
        assert_phi_forms_agree(&p, &lam, 1e-10);
    }
}

#[test]
fn psi_is_nonnegative_and_vanishes_at_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let p = random_atom_params(&mut rng, d);
        assert_eq!(psi(&p, &vec![0.0; d]).unwrap(), 0.0);
        let lam: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..5.0)).collect();
        assert!(psi(&p, &lam).unwrap() >= 0.0);
    }
}

#[test]
fn cir_laplace_transform_with_immigration_at_several_times() {
    let (beta, x, lam): (f64, f64, f64) = (1.7, 0.6, 0.9);
    let p = AdmissibleParams::diffusion(dvector![1.0], dvector![beta], dmatrix![0.0]);
    for t in [0.1, 1.0, 5.0] {
        let exact = (-x * lam / (1.0 + lam * t)).exp() * (1.0 + lam * t).powf(-beta);
        let got = laplace_transform(&p, &[x], &[lam], t, Tolerances::default()).unwrap();
        assert!((got - exact).abs() <= 1e-8 * exact, "t = {t}: {got} vs {exact}");
    }
}

#[test]
fn linear_riccati_grows_exponentially() {
    for b in [-1.3, 0.0, 0.8] {
        let p = AdmissibleParams::diffusion(dvector![0.0], dvector![0.0], dmatrix![b]);
        let sol = solve_v(&p, &[1.5], 2.0, Tolerances::default()).unwrap();
        for t in [0.25, 1.0, 2.0] {
            let exact = 1.5 * (b * t).exp();
            assert!((sol.v_at(t)[0] - exact).abs() <= 1e-8 * exact, "b = {b}, t = {t}");
        }
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn flow_property(seed in any::<u64>(), s in 0.01f64..2.0, t in 0.01f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=3);
        let p = random_atom_params(&mut rng, d);
        let lam: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..4.0)).collect();
        let tol = Tolerances::default();
        let direct = solve_v(&p, &lam, s + t, tol).unwrap();
        let first = solve_v(&p, &lam, s, tol).unwrap();
        let second = solve_v(&p, first.v_end(), t, tol).unwrap();
        let scale = direct.v_end().iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        prop_assert!(sup_distance(direct.v_end(), second.v_end()) <= 1e-6 * scale);
        // the ψ integral is additive along the flow
        let total = first.psi_end() + second.psi_end();
        prop_assert!((direct.psi_end() - total).abs() <= 1e-6 * total.max(1.0));
    }

    #[test]
    fn solution_is_monotone_in_lambda(seed in any::<u64>(), t in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=3);
        let p = random_atom_params(&mut rng, d);
        let lam: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..4.0)).collect();
        let bigger: Vec<f64> = lam.iter().map(|l| l + rng.random_range(0.0..1.0)).collect();
        let tol = Tolerances::default();
        let a = solve_v(&p, &lam, t, tol).unwrap();
        let b = solve_v(&p, &bigger, t, tol).unwrap();
        for (x, y) in a.v_end().iter().zip(b.v_end()) {
            prop_assert!(*x <= *y + 1e-8 * y.abs().max(1.0));
        }
    }

    #[test]
    fn log_laplace_is_affine_in_the_initial_state(seed in any::<u64>(), t in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=3);
        let p = random_atom_params(&mut rng, d);
        let lam: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
        let x1: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
        let x2: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let tol = Tolerances::default();
        let l = |x: &[f64]| -laplace_transform(&p, x, &lam, t, tol).unwrap().ln();
        let (a, b, c, zero) = (l(&x1), l(&x2), l(&sum), l(&vec![0.0; d]));
        prop_assert!((c - (a + b - zero)).abs() <= 1e-10 * c.abs().max(1.0));
        prop_assert_eq!(laplace_transform(&p, &x1, &vec![0.0; d], t, tol).unwrap(), 1.0);
    }
}
