//! Brute-force number-basis evaluation of the amplitude.
//!
//! Only the `n' = n - 1` strip of the system density matrix enters `⟨a⟩`, so
//! the joint density matrix is never built: each term of
//! `Σ_n √(n+1) ρ_{n+1,n}(t)` carries its own Kerr phase and the bath enters
//! through truncated thermal traces over each mode's occupation number.
//! Nothing here uses the closed-form amplitude or decoherence factor.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{EnvMode, EnvironmentSpec, SystemParams};
use crate::perturbative::perturbative_coeffs;

/// Fock-space cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    /// Largest system occupation number kept.
    pub n_max: usize,
    /// Largest bath occupation number kept, per mode.
    pub mu_max: usize,
    pub tail_tol: f64,
}

/// Number-basis coefficients `a_n = e^{-|α|²/2} αⁿ/√n!`, `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockCoeffs {
    pub alpha: Complex64,
    pub coeffs: Vec<Complex64>,
}

impl TruncationSpec {
    /// Smallest cutoffs meeting `tail_tol` for this system and bath.
    pub fn auto(sys: &SystemParams, env: &EnvironmentSpec, tail_tol: f64) -> Result<Self> {
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::TruncationTooSmall(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
        }
        let tails = poisson_tails(sys.mean_number());
        let n_max = tails
            .iter()
            .position(|&tail| tail < tail_tol)
            .ok_or_else(|| Error::TruncationTooSmall("Poisson tail table exhausted".into()))?
            .max(1);

        let x_max = max_boltzmann(env, sys.hbar);
        let mut mu_max = 1;
        if x_max > 0.0 {
            // x^(mu_max+1) < tail_tol
            mu_max = ((tail_tol.ln() / x_max.ln()).floor() as usize).max(1);
            while x_max.powi(mu_max as i32 + 1) >= tail_tol {
                mu_max += 1;
            }
        }
        Ok(Self { n_max, mu_max, tail_tol })
    }

    /// Check both tail conditions for `sys` and `env`.
    pub fn validate(&self, sys: &SystemParams, env: &EnvironmentSpec) -> Result<()> {
        self.check_system(sys)?;
        let x = max_boltzmann(env, sys.hbar);
        self.check_bath(x)
    }

    fn check_system(&self, sys: &SystemParams) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::TruncationTooSmall("n_max must be at least 1".into()));
        }
        let tail = poisson_tail(sys.mean_number(), self.n_max);
        if !(tail < self.tail_tol) {
            return Err(Error::TruncationTooSmall(format!(
                "coherent-state tail beyond n_max = {} is {tail:e}, needs < {:e}",
                self.n_max, self.tail_tol
            )));
        }
        Ok(())
    }

    fn check_bath(&self, x: f64) -> Result<()> {
        if self.mu_max < 1 {
            return Err(Error::TruncationTooSmall("mu_max must be at least 1".into()));
        }
        let tail = x.powi(self.mu_max as i32 + 1);
        if !(tail < self.tail_tol) {
            return Err(Error::TruncationTooSmall(format!(
                "thermal tail beyond mu_max = {} is {tail:e}, needs < {:e}",
                self.mu_max, self.tail_tol
            )));
        }
        Ok(())
    }

    /// Bound on `|oracle - exact|` from the two truncations: the omitted
    /// amplitude terms sum to `|α| P(n ≥ n_max)`, and each truncated thermal
    /// trace is off by at most `x_j^(mu_max+1)`.
    pub fn error_bound(&self, sys: &SystemParams, env: &EnvironmentSpec) -> f64 {
        let alpha = sys.alpha0.norm();
        let amp_tail = alpha * poisson_tail(sys.mean_number(), self.n_max.saturating_sub(1));
        let bath_tail: f64 = env
            .modes
            .iter()
            .map(|m| env.boltzmann_factor(m.omega, sys.hbar).powi(self.mu_max as i32 + 1))
            .sum();
        amp_tail + alpha * bath_tail
    }
}

fn max_boltzmann(env: &EnvironmentSpec, hbar: f64) -> f64 {
    env.modes
        .iter()
        .map(|m| env.boltzmann_factor(m.omega, hbar))
        .fold(0.0, f64::max)
}

/// `tails[n] = Σ_{k>n} e^{-m} m^k/k!`, for `n` up to where the tail is
/// negligible. Terms are built in log space and summed from the far end.
fn poisson_tails(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![0.0];
    }
    let k_end = (mean + 40.0 * mean.sqrt() + 60.0).ceil() as usize;
    let ln_mean = mean.ln();
    let mut ln_fact = 0.0;
    let probs: Vec<f64> = (0..=k_end)
        .map(|k| {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            (-mean + k as f64 * ln_mean - ln_fact).exp()
        })
        .collect();
    let mut tails = vec![0.0; k_end + 1];
    let mut acc = 0.0;
    for n in (0..k_end).rev() {
        acc += probs[n + 1];
        tails[n] = acc;
    }
    tails
}

/// `P(N > n)` for a Poisson law of mean `mean`.
pub fn poisson_tail(mean: f64, n: usize) -> f64 {
    poisson_tails(mean).get(n).copied().unwrap_or(0.0)
}

/// Coherent-state coefficients by the recurrence `a_n = a_{n-1} α/√n`.
pub fn coherent_fock_coeffs(alpha: Complex64, trunc: &TruncationSpec) -> Result<FockCoeffs> {
    let tail = poisson_tail(alpha.norm_sqr(), trunc.n_max);
    if !(tail < trunc.tail_tol) {
        return Err(Error::TruncationTooSmall(format!(
            "coherent-state tail beyond n_max = {} is {tail:e}, needs < {:e}",
            trunc.n_max, trunc.tail_tol
        )));
    }
    let mut coeffs = Vec::with_capacity(trunc.n_max + 1);
    let mut a = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    coeffs.push(a);
    for n in 1..=trunc.n_max {
        a = a * alpha / (n as f64).sqrt();
        coeffs.push(a);
    }
    Ok(FockCoeffs { alpha, coeffs })
}

/// Normalised thermal trace of one bath mode for a system coherence of order
/// `delta_n`: `Σ_{μ=0}^{mu_max} (1 - x) x^μ e^{-iθΔμ}`, `θ = g t/ħ`.
pub fn mode_trace_factor(
    mode: &EnvMode,
    env: &EnvironmentSpec,
    hbar: f64,
    delta_n: i64,
    t: f64,
    trunc: &TruncationSpec,
) -> Result<Complex64> {
    let x = env.boltzmann_factor(mode.omega, hbar);
    trunc.check_bath(x)?;
    let theta = mode.g * t / hbar;
    let step = theta * delta_n as f64;
    let mut weight = 1.0 - x;
    let mut sum = Complex64::new(0.0, 0.0);
    for mu in 0..=trunc.mu_max {
        sum += weight * Complex64::cis(-step * mu as f64);
        weight *= x;
    }
    Ok(sum)
}

/// Product of the `Δ = 1` thermal traces over all bath modes.
pub fn oracle_decoherence(env: &EnvironmentSpec, hbar: f64, t: f64, trunc: &TruncationSpec) -> Result<Complex64> {
    env.modes
        .iter()
        .map(|m| mode_trace_factor(m, env, hbar, 1, t, trunc))
        .product()
}

/// `Σ_{n<n_max} √(n+1) a_{n+1} a_n* e^{-it[ω + μħ(2n+1)]}`, the closed-system
/// part of every `Δ = 1` coherence.
fn strip_sum(sys: &SystemParams, t: f64, coeffs: &FockCoeffs) -> Complex64 {
    let a = &coeffs.coeffs;
    (0..a.len() - 1)
        .map(|n| {
            let phase = -t * (sys.omega + sys.mu * sys.hbar * (2 * n + 1) as f64);
            (n as f64 + 1.0).sqrt() * a[n + 1] * a[n].conj() * Complex64::cis(phase)
        })
        .sum()
}

/// `⟨a(t)⟩` from the truncated joint solution in the number basis.
pub fn oracle_open_amplitude(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
    trunc: &TruncationSpec,
) -> Result<Complex64> {
    trunc.validate(sys, env)?;
    let coeffs = coherent_fock_coeffs(sys.alpha0, trunc)?;
    let bath = oracle_decoherence(env, sys.hbar, t, trunc)?;
    Ok(strip_sum(sys, t, &coeffs) * bath)
}

/// `⟨a(t)⟩` from the number-basis solution of the second-order master
/// equation, `ρ_{n+1,n}(t) = ρ_{n+1,n}(0) e^{-i(ω+δω)t - iμħ(2n+1)t - γt²/2}`.
pub fn perturbative_me_amplitude(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
    trunc: &TruncationSpec,
) -> Result<Complex64> {
    trunc.check_system(sys)?;
    let coeffs = coherent_fock_coeffs(sys.alpha0, trunc)?;
    let pc = perturbative_coeffs(env, sys);
    let envelope = Complex64::new(-0.5 * pc.gamma * t * t, -pc.delta_omega * t).exp();
    Ok(strip_sum(sys, t, &coeffs) * envelope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{closed_amplitude, open_amplitude};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn trunc(n_max: usize, mu_max: usize) -> TruncationSpec {
        TruncationSpec { n_max, mu_max, tail_tol: 1e-12 }
    }

    fn standard() -> (SystemParams, EnvironmentSpec) {
        let sys = SystemParams::new(1.0, 0.1, 1.0, c(2.0, 0.0)).unwrap();
        let env = EnvironmentSpec::new(
            vec![EnvMode::new(1.0, 0.05).unwrap(), EnvMode::new(1.5, 0.08).unwrap()],
            1.0,
            1.0,
        )
        .unwrap();
        (sys, env)
    }

    #[test]
    fn poisson_tail_matches_direct_sum() {
        let m: f64 = 4.0;
        for n in [0usize, 3, 10, 20] {
            let mut fact = 1.0f64;
            let mut direct = 0.0;
            for k in 1..=200usize {
                fact *= k as f64;
                if k > n {
                    direct += (-m).exp() * m.powi(k as i32) / fact;
                }
                if fact.is_infinite() {
                    break;
                }
            }
            let tail = poisson_tail(m, n);
            assert!((tail - direct).abs() <= 1e-14 * direct.max(1e-300) + 1e-300, "{n}: {tail} {direct}");
        }
        assert_eq!(poisson_tail(0.0, 0), 0.0);
    }

    #[test]
    fn vacuum_coefficients() {
        let f = coherent_fock_coeffs(c(0.0, 0.0), &trunc(5, 5)).unwrap();
        assert_eq!(f.coeffs[0], c(1.0, 0.0));
        assert!(f.coeffs[1..].iter().all(|a| *a == c(0.0, 0.0)));
    }

    #[test]
    fn recurrence_matches_factorial_formula() {
        let alpha = c(2.0, 0.0);
        let f = coherent_fock_coeffs(alpha, &trunc(40, 5)).unwrap();
        let mut fact = 1.0f64;
        for (n, a) in f.coeffs.iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            let direct = (-0.5 * alpha.norm_sqr()).exp() * alpha.powi(n as i32) / fact.sqrt();
            assert!((a - direct).norm() <= 1e-13 * direct.norm().max(1e-300));
        }
        assert!((f.coeffs[2].re - 4.0 * (-2.0f64).exp() / 2.0f64.sqrt()).abs() < 1e-13);
        assert!((f.coeffs[2].re - 0.382_785_986_04).abs() < 1e-10);
        let norm: f64 = f.coeffs.iter().map(|a| a.norm_sqr()).sum();
        assert!(norm <= 1.0 + 1e-15 && norm >= 1.0 - 1e-12);
    }

    #[test]
    fn too_small_cutoff_is_rejected() {
        assert!(matches!(
            coherent_fock_coeffs(c(2.0, 0.0), &trunc(5, 5)),
            Err(Error::TruncationTooSmall(_))
        ));
        let env = EnvironmentSpec::identical(1, 1.0, 0.1, 1.0, 1.0).unwrap();
        assert!(matches!(
            mode_trace_factor(&env.modes[0], &env, 1.0, 1, 1.0, &trunc(40, 3)),
            Err(Error::TruncationTooSmall(_))
        ));
    }

    #[test]
    fn auto_truncation_is_minimal() {
        let (sys, env) = standard();
        let t = TruncationSpec::auto(&sys, &env, 1e-12).unwrap();
        t.validate(&sys, &env).unwrap();
        let smaller_n = TruncationSpec { n_max: t.n_max - 1, ..t };
        assert!(smaller_n.validate(&sys, &env).is_err());
        let smaller_mu = TruncationSpec { mu_max: t.mu_max - 1, ..t };
        assert!(smaller_mu.validate(&sys, &env).is_err());
    }

    #[test]
    fn diagonal_trace_is_geometric_sum() {
        let env = EnvironmentSpec::identical(1, 1.0, 0.1, 1.0, 1.0).unwrap();
        let x = (-1.0f64).exp();
        let tr = trunc(40, 60);
        let d0 = mode_trace_factor(&env.modes[0], &env, 1.0, 0, 3.0, &tr).unwrap();
        assert!((d0 - c(1.0 - x.powi(61), 0.0)).norm() < 1e-15);
        let t0 = mode_trace_factor(&env.modes[0], &env, 1.0, 1, 0.0, &tr).unwrap();
        assert!((t0 - d0).norm() < 1e-15);
    }

    #[test]
    fn half_filled_trace_at_pi() {
        let env = EnvironmentSpec::identical(1, 1.0, 1.0, 1.0 / std::f64::consts::LN_2, 1.0).unwrap();
        let tr = trunc(40, 50);
        let v = mode_trace_factor(&env.modes[0], &env, 1.0, 1, PI, &tr).unwrap();
        let x: f64 = 0.5;
        let analytic = (1.0 - x) / (Complex64::new(1.0, 0.0) - x * Complex64::cis(-PI));
        assert!((v - analytic).norm() <= x.powi(51) + 1e-15);
        assert!((v - c(1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn oracle_initial_and_decoupled() {
        let (sys, env) = standard();
        let tr = TruncationSpec::auto(&sys, &env, 1e-12).unwrap();
        let a0 = oracle_open_amplitude(&sys, &env, 0.0, &tr).unwrap();
        assert!((a0 - sys.alpha0).norm() < 1e-11);

        let decoupled = EnvironmentSpec::identical(2, 1.0, 0.0, 1.0, 1.0).unwrap();
        for &t in &[1.0, 7.0, 20.0] {
            let a = oracle_open_amplitude(&sys, &decoupled, t, &tr).unwrap();
            assert!((a - closed_amplitude(&sys, t)).norm() < 1e-11);
        }
    }

    #[test]
    fn closed_system_oracle_matches_closed_form() {
        let (sys, _) = standard();
        let env = EnvironmentSpec::closed();
        let tr = TruncationSpec::auto(&sys, &env, 1e-14).unwrap();
        let a = oracle_open_amplitude(&sys, &env, 1.0, &tr).unwrap();
        assert!((a - closed_amplitude(&sys, 1.0)).norm() <= 1e-10);
    }

    #[test]
    fn oracle_matches_analytic_on_standard_bath() {
        let (sys, env) = standard();
        let tr = TruncationSpec::auto(&sys, &env, 1e-12).unwrap();
        let a = oracle_open_amplitude(&sys, &env, 3.0, &tr).unwrap();
        assert!((a - open_amplitude(&sys, &env, 3.0).a_expect).norm() <= 1e-8);
    }

    #[test]
    fn time_reversal_conjugates_real_alpha() {
        let (sys, env) = standard();
        let tr = TruncationSpec::auto(&sys, &env, 1e-12).unwrap();
        for &t in &[0.7, 4.0, 19.0] {
            let fwd = oracle_open_amplitude(&sys, &env, t, &tr).unwrap();
            let back = oracle_open_amplitude(&sys, &env, -t, &tr).unwrap();
            assert!((back - fwd.conj()).norm() <= 1e-12);
        }
    }

    #[test]
    fn deviation_within_removed_tail_mass() {
        let (sys, env) = standard();
        let t = 5.0;
        let exact = open_amplitude(&sys, &env, t).a_expect;
        let mut prev: Option<f64> = None;
        for n_max in 12..=30 {
            let tr = TruncationSpec { n_max, mu_max: 60, tail_tol: 1.0 - 1e-9 };
            let dev = (oracle_open_amplitude(&sys, &env, t, &tr).unwrap() - exact).norm();
            assert!(dev <= tr.error_bound(&sys, &env) + 1e-14, "{n_max}: {dev}");
            if let Some(p) = prev {
                // extending the cutoff adds one term of size |α| P(N = n_max - 1)
                let added = sys.alpha0.norm()
                    * (poisson_tail(4.0, n_max - 2) - poisson_tail(4.0, n_max - 1));
                assert!(dev <= p + added + 1e-15);
            }
            prev = Some(dev);
        }
    }

    #[test]
    fn perturbative_me_limits() {
        let (sys, env) = standard();
        let tr = TruncationSpec::auto(&sys, &env, 1e-12).unwrap();
        let a0 = perturbative_me_amplitude(&sys, &env, 0.0, &tr).unwrap();
        assert!((a0 - sys.alpha0).norm() < 1e-11);
        let cold = EnvironmentSpec::new(env.modes.clone(), 0.0, 1.0).unwrap();
        let a = perturbative_me_amplitude(&sys, &cold, 2.5, &tr).unwrap();
        assert!((a - closed_amplitude(&sys, 2.5)).norm() < 1e-11);
    }
}
