//! Scenario execution.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ConfigError, LoadedConfig, Scenario, TruncationBlock};
use super::report::*;
use crate::analytic::{closed_amplitude, open_amplitude, timescales};
use crate::error::Error;
use crate::fock::{oracle_decoherence, oracle_open_amplitude, TruncationSpec};
use crate::params::{EnvironmentSpec, SystemParams};
use crate::pde::{verify_exact_solution, GridPoint, PhasePoint, StencilSpec};
use crate::perturbative::{clt_decoherence, perturbative_coeffs, short_time_amplitude};
use crate::thermal::{mc_decoherence_factor, SampleBatch};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Truncation(String),
    Tolerance { max_rel_residual: f64, tolerance: f64 },
    Io { path: PathBuf, source: io::Error },
    Compute(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Truncation(_) => 3,
            CliError::Tolerance { .. } => 4,
            CliError::Io { .. } | CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Truncation(msg) => write!(f, "truncation failure: {msg}"),
            CliError::Tolerance { max_rel_residual, tolerance } => write!(
                f,
                "pde residual {max_rel_residual:e} exceeds tolerance {tolerance:e}"
            ),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Compute(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::TruncationTooSmall(msg) => CliError::Truncation(msg),
            other => CliError::Compute(other),
        }
    }
}

pub fn load(config_path: &Path, overrides: &[String]) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(config_path).map_err(|source| {
        CliError::Config(ConfigError {
            field: None,
            line: None,
            message: format!("cannot read {}: {source}", config_path.display()),
        })
    })?;
    Ok(LoadedConfig::from_str_with(&text, overrides)?)
}

/// Human-readable timescale table.
pub fn timescale_table(cfg: &LoadedConfig) -> Result<String, CliError> {
    let ts = timescales(&cfg.system, &cfg.env, cfg.config.p_max).map_err(|e| {
        CliError::Config(ConfigError { field: Some("system.mu".into()), line: None, message: e.to_string() })
    })?;
    let mut s = String::new();
    s += &format!("t_E  {}\n", ts.t_ehrenfest);
    s += &format!("t_R  {}\n", ts.t_revival);
    if ts.recurrence_times.is_empty() {
        s += "t_p  none (bath not identical or decoupled)\n";
    } else {
        s += "p    t_p\n";
        for (p, t) in ts.recurrence_times.iter().enumerate() {
            s += &format!("{p:<4} {t}\n");
        }
    }
    Ok(s)
}

/// What a completed run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectories: Vec<Trajectory>,
    pub report: ComparisonReport,
}

/// Execute the configured scenario and write its output files.
pub fn run(cfg: &LoadedConfig) -> Result<RunOutput, CliError> {
    let out = execute(cfg)?;
    let c = &cfg.config;
    if c.scenario != Scenario::PdeCheck {
        match &c.output.csv {
            Some(path) => write_file(path, |w| write_csv(w, &out.trajectories))?,
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                write_csv(&mut lock, &out.trajectories).map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
            }
        }
    }
    if let Some(path) = &c.output.report {
        write_file(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &out.report).map_err(io::Error::from)?;
            writeln!(w)
        })?;
    }
    if let Some(pde) = &out.report.pde {
        println!(
            "pde-check: {} points, max relative residual {:e} (tolerance {:e})",
            pde.residual.points, pde.residual.max_rel_residual, pde.tolerance
        );
        if !pde.passed {
            return Err(CliError::Tolerance { max_rel_residual: pde.residual.max_rel_residual, tolerance: pde.tolerance });
        }
    }
    Ok(out)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Run the scenario without touching the filesystem.
pub fn execute(cfg: &LoadedConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.config;
    let sys = &cfg.system;
    let env = &cfg.env;
    let times = c.grid.times();

    let mut report = ComparisonReport {
        scenario: c.scenario.name().to_string(),
        config: serde_json::to_value(&cfg.table).expect("TOML tables serialize to JSON"),
        timescales: timescales(sys, env, c.p_max).ok().map(Into::into),
        truncation: None,
        methods: Vec::new(),
        mc: None,
        perturbative: None,
        pde: None,
    };

    if c.scenario == Scenario::PdeCheck {
        report.pde = Some(pde_check(cfg, &times)?);
        return Ok(RunOutput { trajectories: Vec::new(), report });
    }

    if c.scenario == Scenario::Closed {
        // the closed form is its own reference
        let closed = timed(&mut report, "closed", || Ok(closed_trajectory(sys, &times)))?;
        return Ok(RunOutput { trajectories: vec![closed], report });
    }

    let mut trajectories = Vec::new();
    let analytic = timed(&mut report, "analytic", || Ok(analytic_trajectory(sys, env, &times)))?;
    if matches!(c.scenario, Scenario::ExactOpen | Scenario::CompareAll) {
        trajectories.push(analytic.clone());
    }

    let wants = |s: Scenario| c.scenario == s || c.scenario == Scenario::CompareAll;
    if wants(Scenario::Oracle) {
        let trunc = truncation(sys, env, c.truncation.as_ref().expect("validated"))?;
        report.truncation = Some(TruncationSummary {
            n_max: trunc.n_max,
            mu_max: trunc.mu_max,
            tail_tol: trunc.tail_tol,
            error_bound: trunc.error_bound(sys, env),
        });
        let traj = timed(&mut report, "oracle", || oracle_trajectory(sys, env, &times, &trunc))?;
        trajectories.push(traj);
    }
    if wants(Scenario::Mc) {
        let mc = c.mc.as_ref().expect("validated");
        let start = Instant::now();
        let (traj, stderr) = mc_trajectory(sys, env, &times, mc.samples, mc.seed)?;
        push_method(&mut report, "mc", times.len(), start);
        let mut within = 0;
        let mut worst = 0.0f64;
        for ((row, reference), se) in traj.rows.iter().zip(&analytic.rows).zip(&stderr) {
            let dev = (row.a - reference.a).norm();
            if dev <= 3.0 * se {
                within += 1;
            }
            if dev > 0.0 {
                worst = worst.max(dev / se);
            }
        }
        report.mc = Some(McSummary {
            samples: mc.samples,
            seed: mc.seed,
            points: times.len(),
            within_3_sigma: within,
            max_deviation_over_stderr: worst,
        });
        trajectories.push(traj);
    }
    if wants(Scenario::Perturbative) {
        let traj = timed(&mut report, "perturbative", || Ok(perturbative_trajectory(sys, env, &times)))?;
        report.perturbative = Some(perturbative_summary(sys, env, &traj, &analytic));
        trajectories.push(traj);
    }

    for m in &mut report.methods {
        if let Some(t) = trajectories.iter().find(|t| t.method == m.method) {
            m.max_abs_deviation = t.max_deviation_from(&analytic);
        }
    }
    if c.scenario != Scenario::ExactOpen && c.scenario != Scenario::CompareAll {
        report.methods.retain(|m| m.method != "analytic");
    }
    Ok(RunOutput { trajectories, report })
}

fn timed(
    report: &mut ComparisonReport,
    method: &'static str,
    f: impl FnOnce() -> Result<Trajectory, CliError>,
) -> Result<Trajectory, CliError> {
    let start = Instant::now();
    let traj = f()?;
    push_method(report, method, traj.rows.len(), start);
    Ok(traj)
}

fn push_method(report: &mut ComparisonReport, method: &str, points: usize, start: Instant) {
    let wall_clock_s = start.elapsed().as_secs_f64();
    log::info!("{method}: {points} points in {wall_clock_s:.3} s");
    report.methods.push(MethodSummary { method: method.to_string(), points, max_abs_deviation: 0.0, wall_clock_s });
}

fn truncation(sys: &SystemParams, env: &EnvironmentSpec, block: &TruncationBlock) -> Result<TruncationSpec, CliError> {
    let mut spec = TruncationSpec::auto(sys, env, block.tail_tol)?;
    if let Some(n) = block.n_max {
        spec.n_max = n;
    }
    if let Some(m) = block.mu_max {
        spec.mu_max = m;
    }
    spec.validate(sys, env)?;
    Ok(spec)
}

fn closed_trajectory(sys: &SystemParams, times: &[f64]) -> Trajectory {
    let one = Complex64::new(1.0, 0.0);
    let rows = times.iter().map(|&t| Row { t, a: closed_amplitude(sys, t), r: one }).collect();
    Trajectory { method: "closed", rows }
}

fn analytic_trajectory(sys: &SystemParams, env: &EnvironmentSpec, times: &[f64]) -> Trajectory {
    let rows = times
        .iter()
        .map(|&t| {
            let s = open_amplitude(sys, env, t);
            Row { t, a: s.a_expect, r: s.r_total }
        })
        .collect();
    Trajectory { method: "analytic", rows }
}

fn oracle_trajectory(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    times: &[f64],
    trunc: &TruncationSpec,
) -> Result<Trajectory, CliError> {
    let rows = times
        .iter()
        .map(|&t| {
            Ok(Row {
                t,
                a: oracle_open_amplitude(sys, env, t, trunc)?,
                r: oracle_decoherence(env, sys.hbar, t, trunc)?,
            })
        })
        .collect::<Result<_, Error>>()?;
    Ok(Trajectory { method: "oracle", rows })
}

/// MC trajectory from a single batch shared by all grid points, with the
/// amplitude standard errors.
fn mc_trajectory(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    times: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(Trajectory, Vec<f64>), CliError> {
    let batch = SampleBatch::draw(env, sys.hbar, seed, samples)?;
    let mut rows = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for &t in times {
        let factor = mc_decoherence_factor(sys, env, t, &batch)?;
        let alpha_t = closed_amplitude(sys, t);
        rows.push(Row { t, a: alpha_t * factor.mean, r: factor.mean });
        stderr.push(alpha_t.norm() * factor.stderr);
    }
    Ok((Trajectory { method: "mc", rows }, stderr))
}

fn perturbative_trajectory(sys: &SystemParams, env: &EnvironmentSpec, times: &[f64]) -> Trajectory {
    let rows = times
        .iter()
        .map(|&t| Row { t, a: short_time_amplitude(sys, env, t), r: clt_decoherence(env, sys, t) })
        .collect();
    Trajectory { method: "perturbative", rows }
}

fn perturbative_summary(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    traj: &Trajectory,
    analytic: &Trajectory,
) -> PerturbativeSummary {
    let pc = perturbative_coeffs(env, sys);
    let early: Vec<(f64, f64)> = traj
        .rows
        .iter()
        .zip(&analytic.rows)
        .filter(|(r, _)| r.t > 0.0 && r.t <= pc.validity_time)
        .map(|(r, a)| (r.t, (r.a - a.a).norm()))
        .collect();
    let fit_t: Vec<f64> = early.iter().take(3).map(|p| p.0).collect();
    let fit_d: Vec<f64> = early.iter().take(3).map(|p| p.1).collect();
    let cubic_coefficient = cubic_leading_coefficient(&fit_t, &fit_d);
    let within_cubic_bound = match cubic_coefficient {
        Some(c) => early.iter().filter(|(t, d)| *d <= c * t * t * t).count(),
        None => 0,
    };
    PerturbativeSummary {
        delta_omega: pc.delta_omega,
        gamma: pc.gamma,
        validity_time: pc.validity_time,
        early_points: early.len(),
        cubic_coefficient,
        within_cubic_bound,
    }
}

fn pde_check(cfg: &LoadedConfig, times: &[f64]) -> Result<PdeSummary, CliError> {
    let pde = cfg.config.pde.as_ref().expect("validated");
    let stencil = StencilSpec::new(pde.h, pde.dt).map_err(|e| {
        CliError::Config(ConfigError { field: Some("pde".into()), line: None, message: e.to_string() })
    })?;
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let n = cfg.env.n_modes();
    let mut rng = ChaCha8Rng::seed_from_u64(pde.seed);
    let grid: Vec<GridPoint> = (0..pde.points)
        .map(|_| {
            let u = in_disk(&mut rng, pde.radius);
            let v = in_disk(&mut rng, pde.radius);
            let w = (0..n).map(|_| in_disk(&mut rng, 1.0)).collect();
            let w_bar = (0..n).map(|_| in_disk(&mut rng, 1.0)).collect();
            let t = t0 + (t1 - t0) * rng.random::<f64>();
            GridPoint { point: PhasePoint::open(u, v, w, w_bar).expect("lengths agree"), t }
        })
        .collect();
    let residual = verify_exact_solution(&cfg.system, &cfg.env, &grid, &stencil)?;
    Ok(PdeSummary {
        h: pde.h,
        dt: pde.dt,
        tolerance: pde.tolerance,
        passed: residual.max_rel_residual <= pde.tolerance,
        residual,
    })
}

/// Uniform point in the disk `|z| ≤ radius`.
fn in_disk(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, std::f64::consts::TAU * rng.random::<f64>())
}
