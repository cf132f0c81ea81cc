//! Command-line front end: parameter files in, JSON reports and CSV paths out.
//!
//! Exit codes: 0 success, 1 failed verification, 2 malformed input,
//! 3 inadmissible parameters, 4 numerical failure.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cbi_core::io::{derived_to_json, format_f64, parse_params, ReportFile};
use cbi_core::montecarlo::{self, path_rng, VerifyOptions, VerifyReport};
use cbi_core::ode::Tolerances;
use cbi_core::params::{derive_with_eps, validate, CbiModel, Check, ValidationReport, DEFAULT_EPS};
use cbi_core::simulate::{write_jumps_csv, write_path_csv, PositivityMode, SimConfig, Simulator};
use cbi_core::{moments, riccati, AdmissibleParams, CbiError, Scenario};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_ADMISSIBLE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "CBI_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cbi", version, about = "Multi-type CBI processes: validation, Laplace transforms, moments, simulation")]
pub struct RunSpec {
    /// Worker threads for Monte Carlo work (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ParamSource {
    /// Parameter file, or a scenario file whose parameters are used.
    #[arg(long, required_unless_present = "scenario", conflicts_with = "scenario")]
    pub params: Option<PathBuf>,
    /// Bundled scenario name (S1..S5) or scenario file.
    #[arg(long)]
    pub scenario: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every admissibility condition.
    Validate {
        #[command(flatten)]
        source: ParamSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the modified drift and immigration parameters.
    Derive {
        #[command(flatten)]
        source: ParamSource,
        /// Truncation level used for the simulation drift.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Laplace transform E[exp(-<lam, X_t>) | X_0 = x] from the Riccati equation.
    Laplace {
        #[command(flatten)]
        source: ParamSource,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Nonnegative argument of the transform, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lam: Vec<f64>,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1e-8)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-10)]
        atol: f64,
    },
    /// Closed-form mean E[X_t] from the initial mean m0.
    Mean {
        #[command(flatten)]
        source: ParamSource,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        m0: Vec<f64>,
        #[arg(long)]
        t: f64,
    },
    /// Simulate paths and write one CSV per path.
    Simulate {
        #[command(flatten)]
        source: ParamSource,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        /// Horizon.
        #[arg(long = "T")]
        t_end: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Positivity::PositivePart)]
        positivity: Positivity,
        /// Also write the jump log of each path.
        #[arg(long)]
        record_jumps: bool,
    },
    /// Run a Monte Carlo check against the analytic representation.
    Verify {
        #[arg(value_enum)]
        kind: VerifyKind,
        /// Bundled scenario name (S1..S5) or scenario file.
        #[arg(long)]
        scenario: String,
        /// Paths (default: the scenario's).
        #[arg(long)]
        n: Option<usize>,
        /// Seed (default: the scenario's).
        #[arg(long)]
        seed: Option<u64>,
        /// Step size (default: the scenario's).
        #[arg(long)]
        dt: Option<f64>,
        /// Maximal number of simulated path-steps.
        #[arg(long)]
        budget: Option<u64>,
        /// Seed groups for the weak-order check.
        #[arg(long, default_value_t = 5)]
        groups: usize,
        /// JSON report destination (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the bias constants of a scenario from a step-halving run.
    Calibrate {
        /// Bundled scenario name (S1..S5) or scenario file.
        #[arg(long)]
        scenario: String,
        /// Paths per step size (default: 16 times the scenario's).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Positivity {
    PositivePart,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyKind {
    Mean,
    Laplace,
    Comparison,
    WeakOrder,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<CbiError> for Failure {
    fn from(e: CbiError) -> Self {
        let code = match &e {
            CbiError::NotAdmissible(_) => EXIT_NOT_ADMISSIBLE,
            CbiError::QuadratureFailure(_) | CbiError::StepSizeUnderflow { .. } | CbiError::Overflow => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn load_scenario(name: &str) -> Result<Scenario, Failure> {
    if let Some(s) = Scenario::builtin(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        let known: Vec<_> = Scenario::builtin_names().collect();
        return Err(input_error(format!(
            "unknown scenario '{name}' (bundled: {})",
            known.join(", ")
        )));
    }
    Ok(Scenario::from_json(&read_file(path)?)?)
}

/// Reads a parameter file; a scenario file is accepted as well. The outer
/// error covers I/O, the inner one the contents.
fn read_params(src: &ParamSource) -> Result<cbi_core::Result<AdmissibleParams>, Failure> {
    if let Some(name) = &src.scenario {
        return Ok(load_scenario(name)?.params.to_params());
    }
    let path = src.params.as_ref().expect("clap enforces a parameter source");
    let text = read_file(path)?;
    Ok(match parse_params(&text) {
        Err(CbiError::Schema(msg)) => match Scenario::from_json(&text) {
            Ok(s) => s.params.to_params(),
            Err(_) => Err(CbiError::Schema(msg)),
        },
        other => other,
    })
}

fn load_params(src: &ParamSource) -> Result<AdmissibleParams, Failure> {
    Ok(read_params(src)??)
}

fn model_from(src: &ParamSource) -> Result<CbiModel, Failure> {
    Ok(CbiModel::new(load_params(src)?)?)
}

fn json_line(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes") + "\n"
}

fn emit(out: &mut dyn Write, dest: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match dest {
        Some(path) => write_file(path, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| input_error(format!("cannot write output: {e}"))),
    }
}

/// Report for a parameter file whose dimensions do not fit together.
fn dimension_report(what: &str, expected: usize, found: usize) -> ValidationReport {
    ValidationReport {
        ok: false,
        checks: vec![Check {
            name: format!("dimension.{}", what.replace(' ', "_")),
            passed: false,
            value: found as f64,
            condition: format!("{what} must have length {expected}"),
        }],
    }
}

fn cmd_validate(src: &ParamSource, dest: Option<&PathBuf>, out: &mut dyn Write) -> Result<i32, Failure> {
    let (report, code) = match read_params(src)?.and_then(|p| validate(&p)) {
        Ok(r) => {
            let code = if r.ok { EXIT_OK } else { EXIT_NOT_ADMISSIBLE };
            (r, code)
        }
        // structural problems are reported as a failed check as well
        Err(CbiError::DimensionMismatch { what, expected, found }) => {
            (dimension_report(&what, expected, found), EXIT_INPUT)
        }
        Err(e) => return Err(e.into()),
    };
    let text = serde_json::to_string_pretty(&ReportFile::from_report(&report)).expect("report serializes") + "\n";
    emit(out, dest, &text)?;
    Ok(code)
}

fn cmd_derive(src: &ParamSource, eps: f64, dest: Option<&PathBuf>, out: &mut dyn Write) -> Result<i32, Failure> {
    let model = model_from(src)?;
    let der = derive_with_eps(&model.params, eps)?;
    emit(out, dest, &(derived_to_json(&der) + "\n"))?;
    Ok(EXIT_OK)
}

fn cmd_laplace(
    src: &ParamSource,
    x: &[f64],
    lam: &[f64],
    t: f64,
    tol: Tolerances,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let model = model_from(src)?;
    let value = riccati::laplace_transform(&model.params, x, lam, t, tol)?;
    let v = serde_json::json!({
        "t": format_f64(t),
        "x": x.iter().map(|v| format_f64(*v)).collect::<Vec<_>>(),
        "lambda": lam.iter().map(|v| format_f64(*v)).collect::<Vec<_>>(),
        "laplace_transform": format_f64(value),
    });
    emit(out, None, &json_line(&v))?;
    Ok(EXIT_OK)
}

fn cmd_mean(src: &ParamSource, m0: &[f64], t: f64, out: &mut dyn Write) -> Result<i32, Failure> {
    let model = model_from(src)?;
    let m = moments::mean(&model.derived, &nalgebra_vector(m0), t)?;
    let v = serde_json::json!({
        "t": format_f64(t),
        "m0": m0.iter().map(|v| format_f64(*v)).collect::<Vec<_>>(),
        "mean": m.iter().map(|v| format_f64(*v)).collect::<Vec<_>>(),
    });
    emit(out, None, &json_line(&v))?;
    Ok(EXIT_OK)
}

fn nalgebra_vector(v: &[f64]) -> cbi_core::nalgebra::DVector<f64> {
    cbi_core::nalgebra::DVector::from_column_slice(v)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    src: &ParamSource,
    x0: &[f64],
    cfg: SimConfig,
    n: usize,
    seed: u64,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let model = model_from(src)?;
    let sim = Simulator::new(&model, cfg)?;
    fs::create_dir_all(dir).map_err(|e| input_error(format!("cannot create {}: {e}", dir.display())))?;
    let width = n.saturating_sub(1).to_string().len().max(5);
    let d = model.dim();
    let terminals = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>, Failure> {
            let mut rng = path_rng(seed, i as u64);
            let path = sim.simulate_path(x0, &mut rng)?;
            let write = |name: String, f: &dyn Fn(&mut BufWriter<fs::File>) -> std::io::Result<()>| {
                let p = dir.join(name);
                let file = fs::File::create(&p).map_err(|e| input_error(format!("cannot write {}: {e}", p.display())))?;
                let mut w = BufWriter::new(file);
                f(&mut w)
                    .and_then(|_| w.flush())
                    .map_err(|e| input_error(format!("cannot write {}: {e}", p.display())))
            };
            write(format!("path_{i:0width$}.csv"), &|w| write_path_csv(&path, w))?;
            if cfg.record_jumps {
                write(format!("jumps_{i:0width$}.csv"), &|w| write_jumps_csv(&path, d, w))?;
            }
            Ok(path.terminal().to_vec())
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let v = serde_json::json!({
        "paths": n,
        "seed": seed,
        "dt": format_f64(cfg.dt),
        "T": format_f64(cfg.t_end),
        "steps": cfg.n_steps(),
        "out": dir.display().to_string(),
        "terminal_mean": (0..d)
            .map(|c| format_f64(terminals.iter().map(|x| x[c]).sum::<f64>() / n.max(1) as f64))
            .collect::<Vec<_>>(),
    });
    emit(out, None, &json_line(&v))?;
    Ok(EXIT_OK)
}

fn report_table(r: &VerifyReport) -> String {
    let mut s = format!(
        "verify {} on {}: {} paths, dt = {}, seed = {}\n",
        r.kind, r.scenario, r.n_paths, r.dt, r.seed
    );
    if !r.entries.is_empty() {
        s += &format!(
            "{:<32} {:>14} {:>14} {:>11} {:>11} {:>7}  {}\n",
            "quantity", "analytic", "estimate", "stderr", "allowance", "z", "result"
        );
        for e in &r.entries {
            s += &format!(
                "{:<32} {:>14.8} {:>14.8} {:>11.3e} {:>11.3e} {:>7.3}  {}\n",
                e.quantity,
                e.analytic,
                e.estimate,
                e.stderr,
                e.allowance,
                e.z,
                if e.pass { "pass" } else { "FAIL" }
            );
        }
    }
    for c in &r.comparison {
        s += &format!(
            "dt = {:<12} violations {:>8} / {:<10} fraction {:.3e}  worst {:.3e}  min mean z {:.2}\n",
            c.dt, c.violations, c.triples, c.fraction, c.worst_violation, c.min_mean_z
        );
    }
    s += if r.pass { "PASS\n" } else { "FAIL\n" };
    s
}

/// JSON to `dest` and the table to stdout, or JSON to stdout and the table to stderr.
fn write_report(
    out: &mut dyn Write,
    err: &mut dyn Write,
    dest: Option<&PathBuf>,
    json: &str,
    table: &str,
) -> Result<(), Failure> {
    match dest {
        Some(path) => {
            write_file(path, json)?;
            let _ = out.write_all(table.as_bytes());
        }
        None => {
            let _ = out.write_all(json.as_bytes());
            let _ = err.write_all(table.as_bytes());
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    kind: VerifyKind,
    scenario: &str,
    opts: VerifyOptions,
    groups: usize,
    dest: Option<&PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let s = load_scenario(scenario)?;
    if kind == VerifyKind::WeakOrder {
        let n = opts.n_paths.unwrap_or(s.n_paths);
        let dt = opts.dt.unwrap_or(s.dt);
        let r = montecarlo::weak_order(&s, groups, n, dt)?;
        let json = serde_json::to_string_pretty(&r).expect("report serializes") + "\n";
        let mut table = format!("weak order on {}: {} groups of {} paths, dt = {}\n", s.name, groups, n, dt);
        table += "group    error(dt)       error(dt/2)     ratio\n";
        for (g, ((c, f), q)) in r.error_coarse.iter().zip(&r.error_fine).zip(&r.ratios).enumerate() {
            table += &format!("{g:<8} {c:<15.6e} {f:<15.6e} {q:.4}\n");
        }
        table += &format!("mean ratio {:.4} (limit {})\n", r.mean_ratio, montecarlo::WEAK_ORDER_MAX_RATIO);
        table += if r.pass { "PASS\n" } else { "FAIL\n" };
        write_report(out, err, dest, &json, &table)?;
        return Ok(if r.pass { EXIT_OK } else { EXIT_VERIFY_FAILED });
    }
    let report = match kind {
        VerifyKind::Mean => montecarlo::verify_mean(&s, opts)?,
        VerifyKind::Laplace => montecarlo::verify_laplace(&s, opts)?,
        VerifyKind::Comparison => montecarlo::verify_comparison(&s, opts)?,
        VerifyKind::WeakOrder => unreachable!(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_report(out, err, dest, &json, &report_table(&report))?;
    let _ = writeln!(err, "runtime {:.2} s", report.runtime_secs);
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_calibrate(
    scenario: &str,
    n: Option<usize>,
    seed: Option<u64>,
    dest: Option<&PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let s = load_scenario(scenario)?;
    let n = n.unwrap_or(16 * s.n_paths);
    // keep calibration streams away from the verification seed
    let seed = seed.unwrap_or(s.seed.wrapping_add(1_000_000));
    let c = montecarlo::calibrate(&s, n, seed)?;
    let text = serde_json::to_string_pretty(&c).expect("calibration serializes") + "\n";
    emit(out, dest, &text)?;
    Ok(EXIT_OK)
}

fn dispatch(spec: &RunSpec, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match &spec.command {
        Command::Validate { source, out: dest } => cmd_validate(source, dest.as_ref(), out),
        Command::Derive { source, eps, out: dest } => cmd_derive(source, *eps, dest.as_ref(), out),
        Command::Laplace {
            source,
            x,
            lam,
            t,
            rtol,
            atol,
        } => cmd_laplace(source, x, lam, *t, Tolerances { rtol: *rtol, atol: *atol }, out),
        Command::Mean { source, m0, t } => cmd_mean(source, m0, *t, out),
        Command::Simulate {
            source,
            x0,
            t_end,
            dt,
            n,
            seed,
            out: dir,
            eps,
            positivity,
            record_jumps,
        } => {
            let cfg = SimConfig {
                t_end: *t_end,
                dt: *dt,
                eps_trunc: *eps,
                positivity: match positivity {
                    Positivity::PositivePart => PositivityMode::PositivePart,
                    Positivity::Clamp => PositivityMode::Clamp,
                },
                record_jumps: *record_jumps,
            };
            cmd_simulate(source, x0, cfg, *n, *seed, dir, out)
        }
        Command::Verify {
            kind,
            scenario,
            n,
            seed,
            dt,
            budget,
            groups,
            out: dest,
        } => {
            let opts = VerifyOptions {
                n_paths: *n,
                seed: *seed,
                dt: *dt,
                budget: *budget,
            };
            cmd_verify(*kind, scenario, opts, *groups, dest.as_ref(), out, err)
        }
        Command::Calibrate {
            scenario,
            n,
            seed,
            out: dest,
        } => cmd_calibrate(scenario, *n, *seed, dest.as_ref(), out),
    }
}

/// Executes a parsed command and returns the process exit code.
pub fn run(spec: &RunSpec, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker threads: {e}");
            return EXIT_INPUT;
        }
    };
    let mut stdout_buf: Vec<u8> = Vec::new();
    let mut stderr_buf: Vec<u8> = Vec::new();
    let result = pool.install(|| dispatch(spec, &mut stdout_buf, &mut stderr_buf));
    let _ = out.write_all(&stdout_buf);
    let _ = err.write_all(&stderr_buf);
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunSpec::try_parse_from(args) {
        Ok(spec) => run(&spec, out, err),
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{e}");
                EXIT_OK
            }
        }
    }
}
