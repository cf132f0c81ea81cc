//! Reference scenarios bundled with the crate.

use serde::{Deserialize, Serialize};

use crate::error::{CbiError, Result};
use crate::io::ParamFile;
use crate::params::CbiModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplacePoint {
    pub t: f64,
    pub lambda: Vec<f64>,
}

/// Additive bias allowances `C` (the allowance is `C · dt`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasConstants {
    pub mean: f64,
    pub laplace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSettings {
    pub n_paths: usize,
    /// The coarser step; the check also runs at half of it.
    pub dt: f64,
    /// `β′ = β + beta_shift`.
    pub beta_shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub params: ParamFile,
    pub x0: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub laplace_points: Vec<LaplacePoint>,
    #[serde(default)]
    pub comparison: Option<ComparisonSettings>,
    pub bias: BiasConstants,
}

const BUILTIN: [(&str, &str); 5] = [
    ("S1", include_str!("../scenarios/s1_cir.json")),
    ("S2", include_str!("../scenarios/s2_diffusion_2d.json")),
    ("S3", include_str!("../scenarios/s3_jumps_2d.json")),
    ("S4", include_str!("../scenarios/s4_jumps_1d.json")),
    ("S5", include_str!("../scenarios/s5_pure_jump.json")),
];

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| CbiError::Schema(e.to_string()))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    /// Bundled scenario by name (`S1` … `S5`, case-insensitive).
    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, json)| Self::from_json(json).expect("bundled scenario parses"))
    }

    pub fn model(&self) -> Result<CbiModel> {
        CbiModel::new(self.params.to_params()?)
    }

    pub fn comparison_settings(&self) -> ComparisonSettings {
        self.comparison.clone().unwrap_or_else(|| ComparisonSettings {
            n_paths: 10_000,
            dt: 1.0 / 1024.0,
            beta_shift: vec![1.0; self.params.d],
        })
    }
}
