//! Multi-type continuous-state branching processes with immigration.
//!
//! Parameters and jump measures, the generalized Riccati equation behind the
//! Laplace transform, closed-form first moments, jump-SDE simulation and
//! Monte Carlo cross-checks between these representations.

pub mod error;
pub mod io;
pub mod measures;
pub mod moments;
pub mod montecarlo;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod riccati;
pub mod scenario;
pub mod simulate;

pub use error::{CbiError, Result};
pub use nalgebra;
pub use measures::{Atom, JumpMeasure, MeasurePart, MomentKind, RegionTag, TemperedAxis};
pub use params::{validate, AdmissibleParams, CbiModel, DerivedParams, ValidationReport};
pub use scenario::Scenario;
pub use simulate::{PositivityMode, SimConfig, Simulator};
