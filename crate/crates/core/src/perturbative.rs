//! Second-order (short-time) treatment of the bath.
//!
//! To second order in the coupling the bath shifts the frequency by
//! `δω = ħ⁻¹ Σ_j g_j n̄_j` and damps coherences with the time-dependent rate
//! `tγ`, `γ = ħ⁻² Σ_j g_j² n̄_j(n̄_j + 1)`, giving
//! `⟨a(t)⟩ ≈ e^{-γt²/2} e^{-iδωt} α(t)`.
//!
//! The variance entering `γ` is the thermal number variance `n̄(n̄ + 1)`. It is
//! what the short-time expansion of the exact decoherence factor produces. The
//! exponential law of `|β|²` alone would give `n̄²`; this is not used.

use num_complex::Complex64;

use crate::analytic::closed_amplitude;
use crate::error::{Error, Result};
use crate::params::{EnvironmentSpec, SystemParams};
use crate::thermal::{estimate_mean, thermal_state, McEstimate, SampleBatch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeCoeffs {
    pub delta_omega: f64,
    pub gamma: f64,
    /// Time at which `(t/ħ)|α₀|² Σ_j g_j n̄_j` reaches 1; infinite when the bath
    /// carries no occupation or coupling.
    pub validity_time: f64,
}

/// Mean and cumulative variance of `Y = Σ_j g_j |β_j|²` in the Gaussian limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltSummary {
    pub y_bar: f64,
    pub b_sq_total: f64,
}

pub fn clt_summary(env: &EnvironmentSpec, sys: &SystemParams) -> CltSummary {
    let mut y_bar = 0.0;
    let mut b_sq_total = 0.0;
    for m in &env.modes {
        let n = thermal_state(m.omega, env, sys.hbar).n_bar;
        y_bar += m.g * n;
        b_sq_total += m.g * m.g * n * (n + 1.0);
    }
    CltSummary { y_bar, b_sq_total }
}

pub fn perturbative_coeffs(env: &EnvironmentSpec, sys: &SystemParams) -> PerturbativeCoeffs {
    let s = clt_summary(env, sys);
    let rate = sys.mean_number() * s.y_bar / sys.hbar;
    PerturbativeCoeffs {
        delta_omega: s.y_bar / sys.hbar,
        gamma: s.b_sq_total / (sys.hbar * sys.hbar),
        validity_time: if rate > 0.0 { 1.0 / rate } else { f64::INFINITY },
    }
}

/// `e^{-γt²/2} e^{-iδωt} α(t)`.
pub fn short_time_amplitude(sys: &SystemParams, env: &EnvironmentSpec, t: f64) -> Complex64 {
    let pc = perturbative_coeffs(env, sys);
    Complex64::new(-0.5 * pc.gamma * t * t, -pc.delta_omega * t).exp() * closed_amplitude(sys, t)
}

/// First-order bath factor `exp[-(it/ħ) Σ_j g_j |β_j|²]` for one set of bath
/// amplitudes. Always of unit modulus.
pub fn first_order_fbeta(
    betas: &[Complex64],
    env: &EnvironmentSpec,
    sys: &SystemParams,
    t: f64,
) -> Result<Complex64> {
    if betas.len() != env.n_modes() {
        return Err(Error::DimensionMismatch { expected: env.n_modes(), found: betas.len() });
    }
    let y: f64 = betas.iter().zip(&env.modes).map(|(b, m)| m.g * b.norm_sqr()).sum();
    Ok(Complex64::cis(-t * y / sys.hbar))
}

/// Gaussian (central-limit) reduction of the first-order factor,
/// `e^{-iȳt/ħ} e^{-B²t²/2ħ²}`.
pub fn clt_decoherence(env: &EnvironmentSpec, sys: &SystemParams, t: f64) -> Complex64 {
    let s = clt_summary(env, sys);
    let h = sys.hbar;
    Complex64::new(-0.5 * s.b_sq_total * t * t / (h * h), -s.y_bar * t / h).exp()
}

/// Monte-Carlo average of [`first_order_fbeta`] over a thermal batch.
pub fn mc_first_order_decoherence(
    env: &EnvironmentSpec,
    sys: &SystemParams,
    t: f64,
    batch: &SampleBatch,
) -> Result<McEstimate> {
    if batch.n_modes != env.n_modes() {
        return Err(Error::DimensionMismatch { expected: env.n_modes(), found: batch.n_modes });
    }
    estimate_mean(batch, |row| {
        let y: f64 = row.iter().zip(&env.modes).map(|(b, m)| m.g * b.norm_sqr()).sum();
        Complex64::cis(-t * y / sys.hbar)
    })
}
