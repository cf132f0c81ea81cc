#![allow(dead_code)]

use cbi_core::measures::{Atom, JumpMeasure, MeasurePart};
use cbi_core::nalgebra::{DMatrix, DVector};
use cbi_core::AdmissibleParams;
use rand::Rng;

/// A random finite set of weighted atoms in `ℝ₊^d \ {0}`.
pub fn random_atoms<R: Rng>(rng: &mut R, d: usize, max_atoms: usize) -> JumpMeasure {
    let n = rng.random_range(0..=max_atoms);
    if n == 0 {
        return JumpMeasure::zero(d);
    }
    let atoms = (0..n)
        .map(|_| {
            let mut z: Vec<f64> = (0..d)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) })
                .collect();
            if z.iter().all(|&x| x == 0.0) {
                z[rng.random_range(0..d)] = rng.random_range(0.05..2.0);
            }
            Atom { z, w: rng.random_range(0.05..2.0) }
        })
        .collect();
    JumpMeasure::new(d, vec![MeasurePart::DiscreteAtoms(atoms)]).unwrap()
}

/// Random admissible parameters whose jump measures are finite sets of atoms.
pub fn random_atom_params<R: Rng>(rng: &mut R, d: usize) -> AdmissibleParams {
    let c = DVector::from_fn(d, |_, _| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..1.5) });
    let beta = DVector::from_fn(d, |_, _| rng.random_range(0.0..1.0));
    let b = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            rng.random_range(-2.0..1.0)
        } else {
            rng.random_range(0.0..0.8)
        }
    });
    AdmissibleParams {
        d,
        c,
        beta,
        b,
        nu: random_atoms(rng, d, 3),
        mu: (0..d).map(|_| random_atoms(rng, d, 3)).collect(),
    }
}
