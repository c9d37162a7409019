//! Scenario configuration and the experiment runner behind the binary.
//!
//! A scenario is read from a TOML document, overridden by command-line
//! flags and validated as a whole; every violation is reported, not just
//! the first. Results are written as CSV files (17 significant digits,
//! header row) plus a `meta.json` echoing the scenario.
//!
//! ```toml
//! experiment = "values"
//! out = "results"
//! data = "sine 1"          # zero | sine K | random-trig SEED/DEGREE | [samples]
//!
//! [grid]
//! n = 4096
//! nt = 1024
//!
//! [time]
//! T_over_tstar = 2.0       # or T = 0.3
//!
//! [godunov]
//! cfl = 0.9
//!
//! [solver]
//! tol = 1e-3
//! max_iter = 2000
//! r = 1.0
//! adaptive = true
//! rho_floor = 1e-8
//! ```

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::InitialData;
use crate::duality::{criterion_check, BurgersSystem, StateField};
use crate::error::Error;
use crate::godunov::FvState;
use crate::hopf_lax;
use crate::periodic::{antiderivative_zero_mean, PeriodicGrid, SampledFn};
use crate::primal::{extract_velocity, PrimalSolver, SolverOptions, SpaceTimeGrid};
use crate::shock_free::{optimal_value_contact, optimal_value_hj, pushforward, substitute};

pub const MAX_POINTS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Hopflax,
    Tstar,
    Substitute,
    Pushforward,
    Values,
    Primal,
    Criterion,
    GodunovCompare,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Hopflax,
        Experiment::Tstar,
        Experiment::Substitute,
        Experiment::Pushforward,
        Experiment::Values,
        Experiment::Primal,
        Experiment::Criterion,
        Experiment::GodunovCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Hopflax => "hopflax",
            Experiment::Tstar => "tstar",
            Experiment::Substitute => "substitute",
            Experiment::Pushforward => "pushforward",
            Experiment::Values => "values",
            Experiment::Primal => "primal",
            Experiment::Criterion => "criterion",
            Experiment::GodunovCompare => "godunov-compare",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the horizon is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Absolute(f64),
    /// Multiple of the first shock time.
    ShockMultiple(f64),
    /// `2 T*` when the data forms a shock, `1` otherwise.
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub experiment: Experiment,
    pub data: InitialData,
    pub horizon: Horizon,
    pub n: usize,
    pub nt: usize,
    pub cfl: f64,
    pub solver: SolverOptions,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, column: usize, message: String },
    Validation(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Validation(errors) => {
                writeln!(f, "invalid scenario:")?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    out: Option<PathBuf>,
    data: Option<RawData>,
    grid: Option<RawGrid>,
    time: Option<RawTime>,
    godunov: Option<RawGodunov>,
    solver: Option<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawData {
    Preset(String),
    Samples(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Option<i64>,
    nt: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    #[serde(rename = "T")]
    t: Option<f64>,
    #[serde(rename = "T_over_tstar")]
    ratio: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGodunov {
    cfl: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<f64>,
    max_iter: Option<i64>,
    r: Option<f64>,
    adaptive: Option<bool>,
    rho_floor: Option<f64>,
}

/// Values taken from the command line; each replaces the config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Experiment name; implied by the subcommand.
    #[arg(long)]
    pub experiment: Option<String>,
    /// Spatial grid points.
    #[arg(long)]
    pub n: Option<i64>,
    /// Time steps.
    #[arg(long)]
    pub nt: Option<i64>,
    /// Horizon.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// Horizon as a multiple of the first shock time.
    #[arg(long = "T-over-tstar", allow_negative_numbers = true)]
    pub ratio: Option<f64>,
    /// Seed for random trigonometric data (degree kept, 5 by default).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial data: zero, "sine K" or "random-trig SEED/DEGREE".
    #[arg(long)]
    pub data: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    validate(parse_raw(text)?, &Overrides::default())
}

/// Reads the config named in `overrides` (if any), applies the flags and
/// validates the result.
pub fn load_scenario(overrides: &Overrides) -> Result<Scenario, ConfigError> {
    let raw = match &overrides.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                ConfigError::Validation(vec![format!("cannot read config {}: {e}", path.display())])
            })?;
            parse_raw(&text)?
        }
        None => RawConfig::default(),
    };
    validate(raw, overrides)
}

fn validate(mut raw: RawConfig, o: &Overrides) -> Result<Scenario, ConfigError> {
    let mut errors = Vec::new();
    let grid = raw.grid.get_or_insert_with(Default::default);
    if o.n.is_some() {
        grid.n = o.n;
    }
    if o.nt.is_some() {
        grid.nt = o.nt;
    }
    let time = raw.time.get_or_insert_with(Default::default);
    if o.horizon.is_some() || o.ratio.is_some() {
        time.t = o.horizon;
        time.ratio = o.ratio;
    }

    let experiment = match o.experiment.as_deref().or(raw.experiment.as_deref()) {
        None => {
            errors.push("experiment is required".to_string());
            None
        }
        Some(name) => {
            let e = Experiment::from_name(name);
            if e.is_none() {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                errors.push(format!("unknown experiment {name:?}; expected one of {}", names.join(", ")));
            }
            e
        }
    };

    let mut data = match (&o.data, raw.data) {
        (Some(text), _) => InitialData::parse(text).map_err(|e| errors.push(e)).ok(),
        (None, Some(RawData::Preset(text))) => InitialData::parse(&text).map_err(|e| errors.push(e)).ok(),
        (None, Some(RawData::Samples(values))) => Some(InitialData::Samples { values }),
        (None, None) => Some(InitialData::Sine { k: 1 }),
    };
    if let Some(seed) = o.seed {
        data = Some(match data {
            Some(InitialData::RandomTrig { degree, .. }) => InitialData::RandomTrig { seed, degree },
            _ => InitialData::RandomTrig { seed, degree: 5 },
        });
    }

    let mut size = |name: &str, value: Option<i64>, default: usize| -> usize {
        match value {
            None => default,
            Some(v) if v >= 4 && v as usize <= MAX_POINTS => v as usize,
            Some(v) => {
                errors.push(format!("{name} must lie in [4, {MAX_POINTS}], got {v}"));
                default
            }
        }
    };
    let sample_len = match &data {
        Some(InitialData::Samples { values }) => Some(values.len()),
        _ => None,
    };
    let n = size("n", grid.n, sample_len.unwrap_or(1024));
    let nt = size("nt", grid.nt, 1024);
    if let Some(len) = sample_len {
        if len != n {
            errors.push(format!("data has {len} samples but n = {n}"));
        }
    }

    let horizon = match (time.t, time.ratio) {
        (Some(_), Some(_)) => {
            errors.push("give either T or T_over_tstar, not both".into());
            Horizon::Default
        }
        (Some(t), None) => {
            if !(t > 0.0) || !t.is_finite() {
                errors.push("T must be positive".into());
            }
            Horizon::Absolute(t)
        }
        (None, Some(r)) => {
            if !(r > 0.0) || !r.is_finite() {
                errors.push("T_over_tstar must be positive".into());
            }
            Horizon::ShockMultiple(r)
        }
        (None, None) => Horizon::Default,
    };

    let cfl = raw.godunov.and_then(|g| g.cfl).unwrap_or(crate::godunov::DEFAULT_CFL);
    if !(cfl > 0.0 && cfl <= 1.0) {
        errors.push(format!("cfl must lie in (0, 1], got {cfl}"));
    }

    let mut solver = SolverOptions::default();
    if let Some(s) = raw.solver {
        if let Some(v) = s.tol {
            if !(v > 0.0) {
                errors.push(format!("solver.tol must be positive, got {v}"));
            }
            solver.tol = v;
        }
        if let Some(v) = s.max_iter {
            if v < 1 {
                errors.push(format!("solver.max_iter must be at least 1, got {v}"));
            } else {
                solver.max_iter = v as usize;
            }
        }
        if let Some(v) = s.r {
            if !(v > 0.0) || !v.is_finite() {
                errors.push(format!("solver.r must be positive, got {v}"));
            }
            solver.r = v;
        }
        if let Some(v) = s.adaptive {
            solver.adaptive = v;
        }
        if let Some(v) = s.rho_floor {
            if !(v > 0.0) {
                errors.push(format!("solver.rho_floor must be positive, got {v}"));
            }
            solver.rho_floor = v;
        }
    }

    let out = o.out.clone().or(raw.out).unwrap_or_else(|| PathBuf::from("results"));

    match (errors.is_empty(), experiment, data) {
        (true, Some(experiment), Some(data)) => Ok(Scenario {
            experiment,
            data,
            horizon,
            n,
            nt,
            cfl,
            solver,
            out,
        }),
        _ => Err(ConfigError::Validation(errors)),
    }
}

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug)]
pub enum RunError {
    Validation(String),
    Diverged(String),
    Other(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Diverged(_) => 3,
            RunError::Other(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation(m) | RunError::Diverged(m) | RunError::Other(m) => f.write_str(m),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } => RunError::Diverged(e.to_string()),
            Error::NonZeroMean { .. }
            | Error::InvalidTime(_)
            | Error::GridTooSmall { .. }
            | Error::LengthMismatch { .. }
            | Error::BadOptions(_) => RunError::Validation(e.to_string()),
            other => RunError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Other(e.to_string())
    }
}

fn num(v: f64) -> String {
    // no "-0" in outputs
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn numeric_rows(rows: impl IntoIterator<Item = Vec<f64>>) -> impl Iterator<Item = Vec<String>> {
    rows.into_iter().map(|r| r.into_iter().map(num).collect())
}

/// Summary of a completed run; also written to `meta.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub horizon: f64,
    pub tstar: f64,
    pub results: serde_json::Value,
    pub files: Vec<String>,
}

struct Context {
    scenario: Scenario,
    u0: SampledFn,
    phi0: SampledFn,
    tstar: f64,
    horizon: f64,
    files: Vec<String>,
}

impl Context {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.scenario.out.join(name)
    }
}

/// Runs one scenario and writes its files.
pub fn run(scenario: &Scenario) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let grid = PeriodicGrid::new(scenario.n)?;
    let u0 = scenario.data.sample(grid)?;
    let phi0 = antiderivative_zero_mean(&u0)?;
    let tstar = hopf_lax::shock_time(&phi0);
    let horizon = match scenario.horizon {
        Horizon::Absolute(t) => t,
        Horizon::ShockMultiple(r) if tstar.is_finite() => r * tstar,
        Horizon::ShockMultiple(_) => {
            return Err(RunError::Validation(
                "T_over_tstar needs data that forms a shock; give T instead".into(),
            ))
        }
        Horizon::Default if tstar.is_finite() => 2.0 * tstar,
        Horizon::Default => 1.0,
    };
    fs::create_dir_all(&scenario.out)?;
    let mut ctx = Context {
        scenario: scenario.clone(),
        u0,
        phi0,
        tstar,
        horizon,
        files: Vec::new(),
    };
    let results = match scenario.experiment {
        Experiment::Hopflax => run_hopflax(&mut ctx)?,
        Experiment::Tstar => run_tstar(&mut ctx)?,
        Experiment::Substitute => run_substitute(&mut ctx)?,
        Experiment::Pushforward => run_pushforward(&mut ctx)?,
        Experiment::Values => run_values(&mut ctx)?,
        Experiment::Primal => run_primal(&mut ctx)?,
        Experiment::Criterion => run_criterion(&mut ctx)?,
        Experiment::GodunovCompare => run_godunov(&mut ctx)?,
    };
    let meta_path = ctx.path("meta.json");
    let summary = RunSummary {
        scenario: scenario.clone(),
        horizon,
        tstar,
        results,
        files: ctx.files.clone(),
    };
    let meta = json!({
        "scenario": &summary.scenario,
        "data": scenario.data.label(),
        "horizon": horizon,
        "tstar": if tstar.is_finite() { json!(tstar) } else { json!(null) },
        "results": &summary.results,
        "files": &summary.files,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": crate::par::threads(),
        "parallel": cfg!(feature = "parallel"),
        "seconds": started.elapsed().as_secs_f64(),
    });
    fs::write(meta_path, serde_json::to_string_pretty(&meta).expect("json") + "\n")?;
    Ok(summary)
}

fn snapshot_times(horizon: f64) -> Vec<f64> {
    (1..=4).map(|k| horizon * k as f64 / 4.0).collect()
}

fn solution_rows(t: f64, u: &SampledFn, phi: &SampledFn) -> Vec<Vec<f64>> {
    let g = u.grid();
    (0..u.n())
        .map(|i| vec![t, g.node(i), u.values()[i], phi.values()[i]])
        .collect()
}

fn run_hopflax(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let mut rows = solution_rows(0.0, &ctx.u0, &ctx.phi0);
    let mut entropy = vec![];
    let mut smooth = vec![];
    for t in snapshot_times(ctx.horizon) {
        let sol = hopf_lax::solve(&ctx.phi0, t)?;
        entropy.push(hopf_lax::entropy_total(&sol));
        smooth.push(sol.smooth_characteristics(&ctx.phi0));
        rows.extend(solution_rows(t, &sol.u, &sol.phi));
    }
    let path = ctx.path("solution.csv");
    write_csv(&path, &["t", "x", "u", "phi"], numeric_rows(rows))?;
    Ok(json!({ "times": snapshot_times(ctx.horizon), "entropy": entropy, "smooth_characteristics": smooth }))
}

fn run_tstar(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let finite = ctx.tstar.is_finite();
    println!("T* = {}", if finite { num(ctx.tstar) } else { "inf".into() });
    Ok(json!({ "tstar": if finite { json!(ctx.tstar) } else { json!(null) }, "shock_forms": finite }))
}

fn run_substitute(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let sub = substitute(&ctx.phi0, ctx.horizon)?;
    let at_t = hopf_lax::solve(&sub.phi0_t, ctx.horizon)?;
    let orig = hopf_lax::solve(&ctx.phi0, ctx.horizon)?;
    let mut rows = solution_rows(0.0, &sub.u0_t, &sub.phi0_t);
    rows.extend(solution_rows(ctx.horizon, &at_t.u, &at_t.phi));
    let path = ctx.path("solution.csv");
    write_csv(&path, &["t", "x", "u", "phi"], numeric_rows(rows))?;
    let g = ctx.u0.grid();
    let contact = (0..ctx.u0.n()).map(|i| {
        vec![
            num(g.node(i)),
            (sub.omega[i] as u8).to_string(),
            num(sub.rho0.values()[i]),
        ]
    });
    let path = ctx.path("contact.csv");
    write_csv(&path, &["a", "omega", "rho0"], contact)?;
    Ok(json!({
        "omega_fraction": sub.omega_fraction(),
        "gaps": sub.gaps.len(),
        "mass": sub.total_mass(),
        "min_compression_factor": sub.min_compression_factor(),
        "l1_substitute_vs_original_at_T": at_t.u.l1_distance(&orig.u),
    }))
}

fn run_pushforward(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let sub = substitute(&ctx.phi0, ctx.horizon)?;
    let mut rows = Vec::new();
    let mut w1 = 0.0;
    let mut mass = Vec::new();
    let mut times = vec![0.0];
    times.extend(snapshot_times(ctx.horizon));
    for &t in &times {
        let m = pushforward(&sub, t)?;
        mass.push(m.total_mass());
        if t == ctx.horizon {
            w1 = m.w1_to_uniform();
        }
        rows.extend(m.particles.iter().map(|p| vec![t, p.a, p.position, p.weight, p.velocity]));
    }
    let path = ctx.path("particles.csv");
    write_csv(&path, &["t", "a", "position", "weight", "velocity"], numeric_rows(rows))?;
    Ok(json!({ "times": times, "mass": mass, "w1_to_uniform_at_T": w1 }))
}

fn relative(a: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        (a - reference).abs()
    } else {
        ((a - reference) / reference).abs()
    }
}

fn run_values(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let j_hj = optimal_value_hj(&ctx.phi0, ctx.horizon)?;
    let sub = substitute(&ctx.phi0, ctx.horizon)?;
    let j_contact = optimal_value_contact(&sub);
    let gap = relative(j_contact, j_hj);
    let rows = vec![
        vec!["optiJ".to_string(), num(j_hj), num(0.0)],
        vec!["valueJ".to_string(), num(j_contact), num(gap)],
    ];
    let path = ctx.path("values.csv");
    write_csv(&path, &["method", "J", "gap"], rows)?;
    println!("optiJ = {}  valueJ = {}  relative difference = {:.3e}", num(j_hj), num(j_contact), gap);
    Ok(json!({ "optiJ": j_hj, "valueJ": j_contact, "gap": gap }))
}

fn run_primal(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let s = ctx.scenario.clone();
    let grid = SpaceTimeGrid::new(s.n, s.nt, ctx.horizon)?;
    let mut solver = PrimalSolver::new(&ctx.u0, grid, s.solver)?;
    let outcome = solver.run();
    let report = solver.report.clone();
    let conv = report
        .objective_history
        .iter()
        .zip(&report.gap_history)
        .zip(&report.residual_history)
        .enumerate()
        .map(|(i, ((o, g), r))| vec![num((i + 1) as f64), num(*o), num(*g), num(*r)]);
    let path = ctx.path("convergence.csv");
    write_csv(&path, &["iteration", "objective", "gap", "residual"], conv)?;
    outcome?;

    let it = &solver.iterate;
    let vel = extract_velocity(it, s.solver.rho_floor);
    let n = grid.n;
    let density = (0..grid.nt * n).map(|c| {
        let (k, i) = (c / n, c % n);
        vec![
            num((k as f64 + 0.5) * grid.dt()),
            num(i as f64 * grid.h()),
            num(it.rho[c]),
            num(it.q[c]),
            num(vel.v[c]),
            (vel.vacuum[c] as u8).to_string(),
        ]
    });
    let path = ctx.path("density.csv");
    write_csv(&path, &["t", "x", "rho", "q", "v", "vacuum"], density)?;

    let sub = substitute(&ctx.phi0, ctx.horizon)?;
    let j_contact = optimal_value_contact(&sub);
    let j_hj = report.j_analytic;
    let rows = vec![
        vec!["optiJ".to_string(), num(j_hj), num(0.0)],
        vec!["valueJ".to_string(), num(j_contact), num(relative(j_contact, j_hj))],
        vec!["primal".to_string(), num(report.final_objective()), num(report.final_gap())],
    ];
    let path = ctx.path("values.csv");
    write_csv(&path, &["method", "J", "gap"], rows)?;

    let u_t = hopf_lax::solve(&ctx.phi0, ctx.horizon)?.u;
    let last = (grid.nt - 1) * n;
    let l1 = (0..n).map(|i| (vel.v[last + i] - u_t.values()[i]).abs()).sum::<f64>() / n as f64;
    println!(
        "iterations = {}  objective = {}  gap = {:.3e}  L1(v(T), u(T)) = {:.3e}",
        report.iterations,
        num(report.final_objective()),
        report.final_gap(),
        l1
    );
    Ok(json!({
        "iterations": report.iterations,
        "converged": report.converged,
        "objective": report.final_objective(),
        "J": j_hj,
        "gap": report.final_gap(),
        "residual": report.residual_history.last(),
        "l1_velocity_at_T": l1,
        "warnings": report.warnings,
    }))
}

fn run_criterion(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let (n, nt) = (ctx.scenario.n, ctx.scenario.nt);
    let mut rows = Vec::with_capacity(nt + 1);
    rows.push(ctx.u0.clone());
    for k in 1..=nt {
        let t = ctx.horizon * k as f64 / nt as f64;
        rows.push(hopf_lax::solve(&ctx.phi0, t)?.u);
    }
    let field = StateField::from_rows(&rows, ctx.horizon);
    let report = criterion_check(&BurgersSystem, &field, &[])?;
    let path = ctx.path("criterion.csv");
    write_csv(
        &path,
        &["t", "x", "minEigenvalue"],
        numeric_rows(report.samples.iter().map(|&(t, x, e)| vec![t, x, e])),
    )?;
    debug_assert_eq!(report.samples.len(), (nt + 1) * n);
    println!("criterion {} (min eigenvalue {})", if report.pass { "PASS" } else { "FAIL" }, num(report.min_eigenvalue));
    Ok(json!({ "pass": report.pass, "min_eigenvalue": report.min_eigenvalue }))
}

fn run_godunov(ctx: &mut Context) -> Result<serde_json::Value, RunError> {
    let fv = FvState::new(&ctx.u0, ctx.scenario.cfl).advance(ctx.horizon);
    let hl = hopf_lax::solve(&ctx.phi0, ctx.horizon)?;
    let fv_u = fv.to_sampled();
    let l1 = fv_u.l1_distance(&hl.u);
    let g = ctx.u0.grid();
    let rows = (0..ctx.u0.n()).map(|i| vec![g.node(i), fv_u.values()[i], hl.u.values()[i]]);
    let path = ctx.path("compare.csv");
    write_csv(&path, &["x", "u_godunov", "u_hopflax"], numeric_rows(rows))?;
    println!("L1(godunov, hopf-lax) at T = {:.6e}", l1);
    Ok(json!({ "l1": l1 }))
}

#[derive(Debug, Parser)]
#[command(name = "burgers-duality", version, about = "Entropy solutions of periodic Burgers by convex space-time duality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment named in the config or by --experiment.
    Run(Overrides),
    /// Hopf-Lax solution snapshots.
    Hopflax(Overrides),
    /// First shock time.
    Tstar(Overrides),
    /// Shock-free substitute and contact set.
    Substitute(Overrides),
    /// Pushforward particles.
    Pushforward(Overrides),
    /// Both closed forms of the optimal value.
    Values(Overrides),
    /// Augmented-Lagrangian primal solve.
    Primal(Overrides),
    /// Positivity criterion on the Hopf-Lax field.
    Criterion(Overrides),
    /// Godunov against Hopf-Lax.
    GodunovCompare(Overrides),
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (implied, mut overrides) = match cli.command {
        Command::Run(o) => (None, o),
        Command::Hopflax(o) => (Some(Experiment::Hopflax), o),
        Command::Tstar(o) => (Some(Experiment::Tstar), o),
        Command::Substitute(o) => (Some(Experiment::Substitute), o),
        Command::Pushforward(o) => (Some(Experiment::Pushforward), o),
        Command::Values(o) => (Some(Experiment::Values), o),
        Command::Primal(o) => (Some(Experiment::Primal), o),
        Command::Criterion(o) => (Some(Experiment::Criterion), o),
        Command::GodunovCompare(o) => (Some(Experiment::GodunovCompare), o),
    };
    if let Some(e) = implied {
        match overrides.experiment.as_deref() {
            Some(name) if name != e.name() => {
                eprintln!("--experiment {name} conflicts with subcommand {e}");
                return 2;
            }
            _ => overrides.experiment = Some(e.name().to_string()),
        }
    }
    let scenario = match load_scenario(&overrides) {
        Ok(s) => s,
        Err(e) => {
            eprint!("{e}");
            if matches!(e, ConfigError::Parse { .. }) {
                eprintln!();
            }
            return 2;
        }
    };
    match run(&scenario) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies `SOLVER_THREADS` to the worker pool, if set.
pub fn configure_threads_from_env() {
    if let Ok(v) = std::env::var("SOLVER_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                crate::par::init_threads(n);
            }
            _ => log::warn!("ignoring SOLVER_THREADS={v:?}: expected a positive integer"),
        }
    }
}
