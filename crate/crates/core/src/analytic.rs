//! Closed-form evolution of the coherent amplitude.
//!
//! The joint system+bath Hamiltonian is diagonal in the number basis, so the
//! amplitude factorises into the closed Kerr solution
//!
//! ```text
//! α(t) = α₀ exp[-i(ω + μħ)t] exp[|α₀|² (exp(-2iμħt) - 1)]
//! ```
//!
//! times a product of per-mode decoherence factors
//! `R_j(t) = (1 - x_j) / (1 - x_j exp(-i g_j t/ħ))` with `x_j = exp(-ħω_j/k_B T)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{EnvMode, EnvironmentSpec, SystemParams};

/// One time point of the open-system amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeSample {
    pub t: f64,
    pub a_expect: Complex64,
    pub r_total: Complex64,
    pub r_abs: f64,
    /// Argument of `r_total`. Principal value for a single sample, unwrapped
    /// along the grid when produced by [`open_trajectory`].
    pub r_phase: f64,
}

/// Characteristic times of the collapse/revival dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Timescales {
    pub t_ehrenfest: f64,
    pub t_revival: f64,
    /// Centres `t_p = 2πħp/g` of the Gaussian lobes of an identical-mode bath,
    /// `p = 0..=p_max`. Empty for a non-identical or decoupled bath.
    pub recurrence_times: Vec<f64>,
}

/// Amplitude of the isolated Kerr oscillator.
pub fn closed_amplitude(sys: &SystemParams, t: f64) -> Complex64 {
    let n = sys.mean_number();
    let linear = Complex64::cis(-(sys.omega + sys.mu * sys.hbar) * t);
    let kerr_phase = 2.0 * sys.mu * sys.hbar * t;
    // exp(-iφ) - 1 = (cos φ - 1) - i sin φ, with cos φ - 1 = -2 sin²(φ/2)
    let half = (0.5 * kerr_phase).sin();
    let exponent = Complex64::new(-2.0 * n * half * half, -n * kerr_phase.sin());
    sys.alpha0 * linear * exponent.exp()
}

/// Decoherence factor of one bath mode, `(1 - x) / (1 - x e^{-iθ})` with `θ = g t/ħ`.
pub fn mode_decoherence(mode: &EnvMode, env: &EnvironmentSpec, hbar: f64, t: f64) -> Complex64 {
    let x = env.boltzmann_factor(mode.omega, hbar);
    if x == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let theta = mode.g * t / hbar;
    Complex64::new(1.0 - x, 0.0) / (Complex64::new(1.0, 0.0) - x * Complex64::cis(-theta))
}

/// Modulus and phase of the single-mode decoherence factor, evaluated from
/// the explicit modulus formula and a two-argument arctangent for the phase.
pub fn mode_decoherence_polar(mode: &EnvMode, env: &EnvironmentSpec, hbar: f64, t: f64) -> (f64, f64) {
    let x = env.boltzmann_factor(mode.omega, hbar);
    let theta = mode.g * t / hbar;
    let (s, c) = theta.sin_cos();
    let modulus = (1.0 - x) / (1.0 - 2.0 * x * c + x * x).sqrt();
    let phase = (-x * s).atan2(1.0 - x * c);
    (modulus, phase)
}

/// Total decoherence factor `R(t) = Π_j R_j(t)`; 1 for an empty bath.
pub fn total_decoherence(env: &EnvironmentSpec, hbar: f64, t: f64) -> Complex64 {
    env.modes
        .iter()
        .map(|m| mode_decoherence(m, env, hbar, t))
        .product()
}

/// `⟨a(t)⟩ = α(t) R(t)`.
pub fn open_amplitude(sys: &SystemParams, env: &EnvironmentSpec, t: f64) -> AmplitudeSample {
    let r_total = total_decoherence(env, sys.hbar, t);
    AmplitudeSample {
        t,
        a_expect: closed_amplitude(sys, t) * r_total,
        r_total,
        r_abs: r_total.norm(),
        r_phase: r_total.arg(),
    }
}

/// [`open_amplitude`] on a grid, with `r_phase` unwrapped along the grid.
pub fn open_trajectory(sys: &SystemParams, env: &EnvironmentSpec, times: &[f64]) -> Vec<AmplitudeSample> {
    let mut samples: Vec<_> = times.iter().map(|&t| open_amplitude(sys, env, t)).collect();
    let mut phases: Vec<f64> = samples.iter().map(|s| s.r_phase).collect();
    unwrap_phases(&mut phases);
    for (s, p) in samples.iter_mut().zip(phases) {
        s.r_phase = p;
    }
    samples
}

/// Shift each phase by a multiple of 2π so consecutive values differ by at most π.
pub fn unwrap_phases(phases: &mut [f64]) {
    let mut offset = 0.0;
    for i in 1..phases.len() {
        let raw_prev = phases[i - 1] - offset;
        let jump = phases[i] - raw_prev;
        if jump > PI {
            offset -= TAU * ((jump - PI) / TAU).ceil();
        } else if jump < -PI {
            offset += TAU * ((-jump - PI) / TAU).ceil();
        }
        phases[i] += offset;
    }
}

/// Gaussian approximation of `|R(t)|` near the `p`-th recurrence of an
/// identical-mode bath,
/// `exp[-g²N(t - t_p)²/(2ħ²) · x/(1 - x)²]`, `t_p = 2πħp/g`.
///
/// Only meaningful for large `N` and `t` close to `t_p`; no validity window is
/// enforced.
pub fn gaussian_lobe(env: &EnvironmentSpec, hbar: f64, p: u32, t: f64) -> Result<f64> {
    let mode = env.identical_mode()?;
    let n = env.n_modes() as f64;
    let x = env.boltzmann_factor(mode.omega, hbar);
    let t_p = if p == 0 { 0.0 } else { TAU * hbar * p as f64 / mode.g.abs() };
    let dt = t - t_p;
    let width = x / ((1.0 - x) * (1.0 - x));
    Ok((-(mode.g * mode.g * n * dt * dt) / (2.0 * hbar * hbar) * width).exp())
}

pub fn timescales(sys: &SystemParams, env: &EnvironmentSpec, p_max: u32) -> Result<Timescales> {
    if sys.mu == 0.0 {
        return Err(Error::DegenerateNonlinearity);
    }
    let t_ehrenfest = 1.0 / (2.0 * sys.hbar * sys.mu * sys.alpha0.norm());
    let t_revival = PI / (sys.hbar * sys.mu);
    let recurrence_times = match env.identical_mode() {
        Ok(mode) if mode.g != 0.0 => (0..=p_max)
            .map(|p| TAU * sys.hbar * p as f64 / mode.g.abs())
            .collect(),
        _ => Vec::new(),
    };
    Ok(Timescales { t_ehrenfest, t_revival, recurrence_times })
}
