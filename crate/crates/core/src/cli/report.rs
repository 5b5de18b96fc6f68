//! CSV trajectories and the JSON comparison report.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::analytic::{unwrap_phases, Timescales};
use crate::pde::ResidualReport;

pub const CSV_HEADER: &str = "t,re_a,im_a,abs_a,re_R,im_R,abs_R,phase_R,method";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub a: Complex64,
    pub r: Complex64,
}

/// One method's rows over the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: &'static str,
    pub rows: Vec<Row>,
}

impl Trajectory {
    /// Phase of `R` along the grid with 2π jumps removed.
    pub fn unwrapped_phase(&self) -> Vec<f64> {
        let mut phase: Vec<f64> = self.rows.iter().map(|r| r.r.arg()).collect();
        unwrap_phases(&mut phase);
        phase
    }

    pub fn max_deviation_from(&self, reference: &Trajectory) -> f64 {
        self.rows
            .iter()
            .zip(&reference.rows)
            .map(|(a, b)| (a.a - b.a).norm())
            .fold(0.0, f64::max)
    }
}

/// Write `trajectories` one row-group after another. Numbers use Rust's
/// shortest round-trip formatting.
pub fn write_csv<W: Write>(out: &mut W, trajectories: &[Trajectory]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for traj in trajectories {
        let phase = traj.unwrapped_phase();
        for (row, ph) in traj.rows.iter().zip(phase) {
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                row.t,
                row.a.re,
                row.a.im,
                row.a.norm(),
                row.r.re,
                row.r.im,
                row.r.norm(),
                ph,
                traj.method
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub points: usize,
    /// Largest `|⟨a⟩ - ⟨a⟩_analytic|` over the grid.
    pub max_abs_deviation: f64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSummary {
    pub n_max: usize,
    pub mu_max: usize,
    pub tail_tol: f64,
    /// Bound on the amplitude error caused by the cutoffs.
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimescaleSummary {
    pub t_ehrenfest: f64,
    pub t_revival: f64,
    pub recurrence_times: Vec<f64>,
}

impl From<Timescales> for TimescaleSummary {
    fn from(t: Timescales) -> Self {
        Self { t_ehrenfest: t.t_ehrenfest, t_revival: t.t_revival, recurrence_times: t.recurrence_times }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub samples: usize,
    pub seed: u64,
    pub points: usize,
    pub within_3_sigma: usize,
    /// Largest deviation from the analytic amplitude in units of the standard
    /// error; zero deviations count as zero.
    pub max_deviation_over_stderr: f64,
}

/// Short-time comparison: `|⟨a⟩_pert - ⟨a⟩_analytic| ≈ C t³` at small `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbativeSummary {
    pub delta_omega: f64,
    pub gamma: f64,
    pub validity_time: f64,
    /// Grid points with `0 < t ≤ validity_time`.
    pub early_points: usize,
    /// Leading coefficient `C` from `dev/t³ = C + D t` on the first three
    /// early points; absent with fewer than three.
    pub cubic_coefficient: Option<f64>,
    pub within_cubic_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeSummary {
    pub h: f64,
    pub dt: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub residual: ResidualReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    /// The config as run, overrides included.
    pub config: serde_json::Value,
    pub timescales: Option<TimescaleSummary>,
    pub truncation: Option<TruncationSummary>,
    pub methods: Vec<MethodSummary>,
    pub mc: Option<McSummary>,
    pub perturbative: Option<PerturbativeSummary>,
    pub pde: Option<PdeSummary>,
}

/// Fit `dev/t³ = C + D t` by least squares and return `C`.
pub fn cubic_leading_coefficient(t: &[f64], dev: &[f64]) -> Option<f64> {
    if t.len() < 3 || t.len() != dev.len() {
        return None;
    }
    let n = t.len() as f64;
    let y: Vec<f64> = t.iter().zip(dev).map(|(t, d)| d / (t * t * t)).collect();
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|t| (t - mt) * (t - mt)).sum();
    let sxy: f64 = t.iter().zip(&y).map(|(t, y)| (t - mt) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(my - sxy / sxx * mt)
}
