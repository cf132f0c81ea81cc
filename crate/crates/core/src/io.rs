//! JSON representation of parameter sets, derived parameters and validation
//! reports.
//!
//! Numbers are written as decimal strings with 17 significant digits so that
//! they survive a round trip bit for bit; on input both JSON numbers and
//! such strings are accepted.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CbiError, Result};
use crate::measures::{Atom, JumpMeasure, MeasurePart, TemperedAxis};
use crate::params::{AdmissibleParams, DerivedParams, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Number(f64),
    Text(String),
}

impl Num {
    pub fn value(&self) -> Result<f64> {
        match self {
            Num::Number(v) => Ok(*v),
            Num::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| CbiError::Schema(format!("'{s}' is not a number"))),
        }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num::Text(format_f64(v))
    }
}

/// 17 significant digits; `inf`, `-inf` and `NaN` for non-finite values.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// `serialize_with` helper writing a float as a 17-digit string.
pub fn ser_f64<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_f64(*v))
}

/// `serialize_with` helper for float vectors.
pub fn ser_vec_f64<S: serde::Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| format_f64(*x)))
}

fn nums(v: &[Num]) -> Result<Vec<f64>> {
    v.iter().map(Num::value).collect()
}

fn to_nums<'a>(v: impl IntoIterator<Item = &'a f64>) -> Vec<Num> {
    v.into_iter().map(|&x| x.into()).collect()
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<Num>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

fn rows_to_matrix(what: &str, rows: &[Vec<Num>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d {
        return Err(CbiError::DimensionMismatch {
            what: format!("{what} rows"),
            expected: d,
            found: rows.len(),
        });
    }
    let mut m = DMatrix::zeros(d, d);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(CbiError::DimensionMismatch {
                what: format!("{what} row {}", i + 1),
                expected: d,
                found: row.len(),
            });
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = v.value()?;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub z: Vec<Num>,
    pub w: Num,
}

/// A jump measure; `axis` is 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Discrete { atoms: Vec<AtomSpec> },
    ProductExponential { mass: Num, rates: Vec<Num> },
    TemperedPowerLawAxis { axis: usize, alpha: Num, theta: Num, scale: Num },
    Mixture { components: Vec<MeasureSpec> },
}

impl MeasureSpec {
    fn collect_parts(&self, out: &mut Vec<MeasurePart>) -> Result<()> {
        match self {
            MeasureSpec::Discrete { atoms } => {
                let atoms = atoms
                    .iter()
                    .map(|a| Ok(Atom { z: nums(&a.z)?, w: a.w.value()? }))
                    .collect::<Result<Vec<_>>>()?;
                out.push(MeasurePart::DiscreteAtoms(atoms));
            }
            MeasureSpec::ProductExponential { mass, rates } => out.push(MeasurePart::ProductExponential {
                mass: mass.value()?,
                rates: nums(rates)?,
            }),
            MeasureSpec::TemperedPowerLawAxis {
                axis,
                alpha,
                theta,
                scale,
            } => out.push(MeasurePart::TemperedPowerLawAxis(TemperedAxis {
                axis: *axis,
                alpha: alpha.value()?,
                theta: theta.value()?,
                scale: scale.value()?,
            })),
            MeasureSpec::Mixture { components } => {
                for c in components {
                    c.collect_parts(out)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_measure(spec: Option<&MeasureSpec>, dim: usize) -> Result<JumpMeasure> {
        let mut parts = Vec::new();
        if let Some(s) = spec {
            s.collect_parts(&mut parts)?;
        }
        JumpMeasure::new(dim, parts)
    }

    pub fn from_measure(m: &JumpMeasure) -> Option<MeasureSpec> {
        let mut specs: Vec<MeasureSpec> = m
            .parts()
            .iter()
            .map(|p| match p {
                MeasurePart::DiscreteAtoms(atoms) => MeasureSpec::Discrete {
                    atoms: atoms
                        .iter()
                        .map(|a| AtomSpec {
                            z: to_nums(&a.z),
                            w: a.w.into(),
                        })
                        .collect(),
                },
                MeasurePart::ProductExponential { mass, rates } => MeasureSpec::ProductExponential {
                    mass: (*mass).into(),
                    rates: to_nums(rates),
                },
                MeasurePart::TemperedPowerLawAxis(t) => MeasureSpec::TemperedPowerLawAxis {
                    axis: t.axis,
                    alpha: t.alpha.into(),
                    theta: t.theta.into(),
                    scale: t.scale.into(),
                },
            })
            .collect();
        match specs.len() {
            0 => None,
            1 => specs.pop(),
            _ => Some(MeasureSpec::Mixture { components: specs }),
        }
    }
}

/// Parameter file: `{"d", "c", "beta", "B", "nu", "mu"}`; `null` stands for the zero measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub d: usize,
    pub c: Vec<Num>,
    pub beta: Vec<Num>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Num>>,
    #[serde(default)]
    pub nu: Option<MeasureSpec>,
    #[serde(default)]
    pub mu: Vec<Option<MeasureSpec>>,
}

impl ParamFile {
    /// Structural dimension errors surface as `DimensionMismatch`; admissibility
    /// is left to [`validate`](crate::params::validate).
    pub fn to_params(&self) -> Result<AdmissibleParams> {
        let d = self.d;
        if d == 0 {
            return Err(CbiError::DimensionMismatch {
                what: "d".into(),
                expected: 1,
                found: 0,
            });
        }
        let mu = if self.mu.is_empty() {
            (0..d).map(|_| JumpMeasure::zero(d)).collect()
        } else {
            self.mu
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    MeasureSpec::to_measure(m.as_ref(), d).map_err(|e| match e {
                        CbiError::DimensionMismatch { what, expected, found } => CbiError::DimensionMismatch {
                            what: format!("mu[{i}] {what}"),
                            expected,
                            found,
                        },
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        };
        let nu = MeasureSpec::to_measure(self.nu.as_ref(), d).map_err(|e| match e {
            CbiError::DimensionMismatch { what, expected, found } => CbiError::DimensionMismatch {
                what: format!("nu {what}"),
                expected,
                found,
            },
            other => other,
        })?;
        let p = AdmissibleParams {
            d,
            c: DVector::from_vec(nums(&self.c)?),
            beta: DVector::from_vec(nums(&self.beta)?),
            b: rows_to_matrix("B", &self.b, d)?,
            nu,
            mu,
        };
        Ok(p)
    }

    pub fn from_params(p: &AdmissibleParams) -> Self {
        Self {
            d: p.d,
            c: to_nums(p.c.iter()),
            beta: to_nums(p.beta.iter()),
            b: matrix_to_rows(&p.b),
            nu: MeasureSpec::from_measure(&p.nu),
            mu: p.mu.iter().map(MeasureSpec::from_measure).collect(),
        }
    }
}

pub fn parse_params(json: &str) -> Result<AdmissibleParams> {
    let file: ParamFile = serde_json::from_str(json).map_err(|e| CbiError::Schema(e.to_string()))?;
    file.to_params()
}

pub fn params_to_json(p: &AdmissibleParams) -> String {
    serde_json::to_string_pretty(&ParamFile::from_params(p)).expect("parameter file serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedFile {
    pub beta_tilde: Vec<Num>,
    #[serde(rename = "B_tilde")]
    pub b_tilde: Vec<Vec<Num>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<Num>>,
    #[serde(rename = "B_hat")]
    pub b_hat: Vec<Vec<Num>>,
    pub truncation: TruncationFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationFile {
    pub eps: Num,
    pub beta: Vec<Num>,
    pub matrix: Vec<Vec<Num>>,
    /// Per type, `∫ z 1{‖z‖ < ε} μ_j(dz)` over the truncated parts.
    pub small_jump_mean: Vec<Vec<Num>>,
    pub immigration_small_jump_mean: Vec<Num>,
    pub immigration_rate: Num,
    pub branching_rates: Vec<Num>,
}

impl DerivedFile {
    pub fn from_derived(der: &DerivedParams) -> Self {
        let t = &der.truncation;
        Self {
            beta_tilde: to_nums(der.beta_tilde.iter()),
            b_tilde: matrix_to_rows(&der.b_tilde),
            d: matrix_to_rows(&der.d),
            b_hat: matrix_to_rows(&der.b_hat),
            truncation: TruncationFile {
                eps: t.eps.into(),
                beta: to_nums(t.beta.iter()),
                matrix: matrix_to_rows(&t.matrix),
                small_jump_mean: t.mu_small_mean.iter().map(|v| to_nums(v.iter())).collect(),
                immigration_small_jump_mean: to_nums(t.nu_small_mean.iter()),
                immigration_rate: t.immigration_rate.into(),
                branching_rates: to_nums(&t.branching_rates),
            },
        }
    }

    pub fn to_derived(&self) -> Result<DerivedParams> {
        let d = self.beta_tilde.len();
        let t = &self.truncation;
        Ok(DerivedParams {
            beta_tilde: DVector::from_vec(nums(&self.beta_tilde)?),
            b_tilde: rows_to_matrix("B_tilde", &self.b_tilde, d)?,
            d: rows_to_matrix("D", &self.d, d)?,
            b_hat: rows_to_matrix("B_hat", &self.b_hat, d)?,
            truncation: crate::params::JumpTruncation {
                eps: t.eps.value()?,
                beta: DVector::from_vec(nums(&t.beta)?),
                matrix: rows_to_matrix("truncation matrix", &t.matrix, d)?,
                nu_small_mean: DVector::from_vec(nums(&t.immigration_small_jump_mean)?),
                mu_small_mean: t
                    .small_jump_mean
                    .iter()
                    .map(|v| Ok(DVector::from_vec(nums(v)?)))
                    .collect::<Result<Vec<_>>>()?,
                immigration_rate: t.immigration_rate.value()?,
                branching_rates: nums(&t.branching_rates)?,
            },
        })
    }
}

pub fn derived_to_json(der: &DerivedParams) -> String {
    serde_json::to_string_pretty(&DerivedFile::from_derived(der)).expect("derived parameters serialize")
}

pub fn derived_from_json(json: &str) -> Result<DerivedParams> {
    let file: DerivedFile = serde_json::from_str(json).map_err(|e| CbiError::Schema(e.to_string()))?;
    file.to_derived()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFile {
    pub name: String,
    pub passed: bool,
    pub value: Num,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub ok: bool,
    pub checks: Vec<CheckFile>,
}

impl ReportFile {
    pub fn from_report(r: &ValidationReport) -> Self {
        Self {
            ok: r.ok,
            checks: r
                .checks
                .iter()
                .map(|c| CheckFile {
                    name: c.name.clone(),
                    passed: c.passed,
                    value: c.value.into(),
                    condition: c.condition.clone(),
                })
                .collect(),
        }
    }
}
