//! Thermal bath statistics and Monte-Carlo reduction over its P-representation.
//!
//! A thermal mode with mean occupation `n̄` is a Gaussian mixture of coherent
//! states `|β⟩` with density `exp(-|β|²/n̄)/(π n̄)`. Averaging the exact
//! coherent-state bath factor `exp[-|β|²(1 - e^{-iθ})]` over this density
//! reproduces the analytic decoherence factor.
//!
//! # Random streams
//!
//! Samples are drawn in chunks of [`CHUNK_SIZE`]. Chunk `k` uses a
//! `ChaCha8Rng` (rand_chacha) seeded with `seed_from_u64(seed)` and switched to
//! stream `k` with `set_stream`. Within a sample, modes are drawn in order, real
//! part before imaginary part, each from `rand_distr::StandardNormal`. The
//! batch therefore does not depend on the number of worker threads.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analytic::closed_amplitude;
use crate::error::{Error, Result};
use crate::params::{EnvMode, EnvironmentSpec, SystemParams};

/// Samples per independent random stream.
pub const CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalModeState {
    pub n_bar: f64,
    pub boltzmann_x: f64,
}

/// Sampled bath amplitudes, `count` rows of `n_modes` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub count: usize,
    pub n_modes: usize,
    pub betas: Vec<Complex64>,
}

/// Sample mean of a complex quantity with its standard error.
///
/// `stderr` combines the standard errors of the real and imaginary parts in
/// quadrature. It is infinite when `count == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub count: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn brackets(&self, value: Complex64, k: f64) -> bool {
        (self.mean - value).norm() <= k * self.stderr
    }
}

/// Thermal state of a mode at frequency `omega`.
pub fn bose_occupation(omega: f64, env: &EnvironmentSpec, hbar: f64) -> Result<ThermalModeState> {
    if !(omega > 0.0) {
        return Err(Error::NonPositiveFrequency(omega));
    }
    Ok(thermal_state(omega, env, hbar))
}

pub(crate) fn thermal_state(omega: f64, env: &EnvironmentSpec, hbar: f64) -> ThermalModeState {
    if env.temperature == 0.0 {
        return ThermalModeState { n_bar: 0.0, boltzmann_x: 0.0 };
    }
    let r = hbar * omega / (env.k_b * env.temperature);
    ThermalModeState { n_bar: 1.0 / r.exp_m1(), boltzmann_x: (-r).exp() }
}

/// Draw one coherent amplitude from the thermal P-distribution: real and
/// imaginary parts are independent normals with variance `n̄/2`.
pub fn sample_thermal_coherent<R: Rng + ?Sized>(state: &ThermalModeState, rng: &mut R) -> Complex64 {
    if state.n_bar == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let sigma = (0.5 * state.n_bar).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sigma * re, sigma * im)
}

impl SampleBatch {
    /// Draw `count` joint bath samples for `env`.
    pub fn draw(env: &EnvironmentSpec, hbar: f64, seed: u64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyBatch);
        }
        let n_modes = env.n_modes();
        let states: Vec<ThermalModeState> = env
            .modes
            .iter()
            .map(|m| bose_occupation(m.omega, env, hbar))
            .collect::<Result<_>>()?;
        let mut betas = vec![Complex64::new(0.0, 0.0); count * n_modes];
        if n_modes > 0 {
            betas
                .par_chunks_mut(CHUNK_SIZE * n_modes)
                .enumerate()
                .for_each(|(chunk, out)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(chunk as u64);
                    for row in out.chunks_mut(n_modes) {
                        for (b, s) in row.iter_mut().zip(&states) {
                            *b = sample_thermal_coherent(s, &mut rng);
                        }
                    }
                });
        }
        Ok(Self { seed, count, n_modes, betas })
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.betas[m * self.n_modes..(m + 1) * self.n_modes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        (0..self.count).map(move |m| self.row(m))
    }

    fn check_modes(&self, env: &EnvironmentSpec) -> Result<()> {
        if self.n_modes != env.n_modes() {
            return Err(Error::DimensionMismatch { expected: env.n_modes(), found: self.n_modes });
        }
        Ok(())
    }
}

/// Exact coherent-state bath factor of one mode, `exp[-|β|²(1 - e^{-iθ})]`, `θ = g t/ħ`.
pub fn f_beta_mode(beta: Complex64, mode: &EnvMode, sys: &SystemParams, t: f64) -> Complex64 {
    let theta = mode.g * t / sys.hbar;
    let n = beta.norm_sqr();
    // 1 - e^{-iθ} = 2 sin²(θ/2) + i sin θ
    let half = (0.5 * theta).sin();
    Complex64::new(-2.0 * n * half * half, -n * theta.sin()).exp()
}

/// Per-chunk running moments of a complex sample, merged in chunk order.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    mean: Complex64,
    m2_re: f64,
    m2_im: f64,
}

impl Moments {
    fn empty() -> Self {
        Self { n: 0.0, mean: Complex64::new(0.0, 0.0), m2_re: 0.0, m2_im: 0.0 }
    }

    fn push(&mut self, z: Complex64) {
        self.n += 1.0;
        let d = z - self.mean;
        self.mean += d / self.n;
        let d2 = z - self.mean;
        self.m2_re += d.re * d2.re;
        self.m2_im += d.im * d2.im;
    }

    fn merge(self, other: Self) -> Self {
        if other.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = self.n * other.n / n;
        Self {
            n,
            mean: self.mean + d * (other.n / n),
            m2_re: self.m2_re + other.m2_re + d.re * d.re * w,
            m2_im: self.m2_im + other.m2_im + d.im * d.im * w,
        }
    }
}

/// Mean and standard error of `f` over the batch rows.
///
/// Rows are processed in [`CHUNK_SIZE`] blocks in parallel; block moments are
/// merged in block order, so the result is bit-reproducible.
pub fn estimate_mean<F>(batch: &SampleBatch, f: F) -> Result<McEstimate>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    if batch.count == 0 {
        return Err(Error::EmptyBatch);
    }
    let blocks: Vec<Moments> = (0..batch.count.div_ceil(CHUNK_SIZE))
        .into_par_iter()
        .map(|k| {
            let mut acc = Moments::empty();
            let end = ((k + 1) * CHUNK_SIZE).min(batch.count);
            for m in k * CHUNK_SIZE..end {
                acc.push(f(batch.row(m)));
            }
            acc
        })
        .collect();
    let total = blocks.into_iter().fold(Moments::empty(), Moments::merge);
    let stderr = if batch.count > 1 {
        let denom = total.n * (total.n - 1.0);
        ((total.m2_re + total.m2_im) / denom).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate { mean: total.mean, stderr, count: batch.count })
}

/// Monte-Carlo estimate of the decoherence factor `R(t)`.
pub fn mc_decoherence_factor(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
    batch: &SampleBatch,
) -> Result<McEstimate> {
    batch.check_modes(env)?;
    estimate_mean(batch, |row| {
        row.iter()
            .zip(&env.modes)
            .map(|(b, m)| f_beta_mode(*b, m, sys, t))
            .product()
    })
}

/// Monte-Carlo estimate of `⟨a(t)⟩ = α(t) E_P[Π_j f_β^{(j)}]`.
///
/// `stderr` is the factor's standard error scaled by `|α(t)|`.
pub fn mc_reduced_amplitude(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    t: f64,
    batch: &SampleBatch,
) -> Result<McEstimate> {
    let factor = mc_decoherence_factor(sys, env, t, batch)?;
    let alpha_t = closed_amplitude(sys, t);
    Ok(McEstimate {
        mean: alpha_t * factor.mean,
        stderr: alpha_t.norm() * factor.stderr,
        count: factor.count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{mode_decoherence, open_amplitude};
    use std::f64::consts::{LN_2, PI, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
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
    fn occupation_values() {
        let cold = EnvironmentSpec::identical(1, 1.0, 0.1, 0.0, 1.0).unwrap();
        let s = bose_occupation(1.0, &cold, 1.0).unwrap();
        assert_eq!((s.n_bar, s.boltzmann_x), (0.0, 0.0));

        let env = EnvironmentSpec::identical(1, 1.0, 0.1, 1.0 / LN_2, 1.0).unwrap();
        let s = bose_occupation(1.0, &env, 1.0).unwrap();
        assert!((s.n_bar - 1.0).abs() < 1e-14);
        assert!((s.boltzmann_x - 0.5).abs() < 1e-15);

        // e from its Taylor series, independent of exp()
        let e: f64 = (0..30).scan(1.0f64, |term, k| {
            let out = *term;
            *term /= (k + 1) as f64;
            Some(out)
        }).sum();
        let env = EnvironmentSpec::identical(1, 1.0, 0.1, 1.0, 1.0).unwrap();
        let s = bose_occupation(1.0, &env, 1.0).unwrap();
        assert!((s.n_bar - 1.0 / (e - 1.0)).abs() < 1e-14);
        assert!((s.n_bar - 0.5819767069).abs() < 1e-10);

        assert_eq!(bose_occupation(0.0, &env, 1.0), Err(Error::NonPositiveFrequency(0.0)));
    }

    #[test]
    fn occupation_matches_boltzmann_ratio() {
        for &r in &[0.05, 0.3, 1.0, 2.5, 7.0] {
            let env = EnvironmentSpec::identical(1, 1.0, 0.1, 1.0 / r, 1.0).unwrap();
            let s = bose_occupation(1.0, &env, 1.0).unwrap();
            let ratio = s.boltzmann_x / (1.0 - s.boltzmann_x);
            assert!((s.n_bar - ratio).abs() <= 1e-14 * s.n_bar.max(1.0) / (1.0 - s.boltzmann_x));
        }
    }

    #[test]
    fn vacuum_sample_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = ThermalModeState { n_bar: 0.0, boltzmann_x: 0.0 };
        assert_eq!(sample_thermal_coherent(&s, &mut rng), c(0.0, 0.0));
    }

    #[test]
    fn sampled_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 100_000;
        let s1 = ThermalModeState { n_bar: 1.0, boltzmann_x: 0.5 };
        let sq: Vec<f64> = (0..m).map(|_| sample_thermal_coherent(&s1, &mut rng).norm_sqr()).collect();
        let mean = sq.iter().sum::<f64>() / m as f64;
        let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!((mean - 1.0).abs() <= 3.0 * (var / m as f64).sqrt(), "{mean}");

        let s2 = ThermalModeState { n_bar: 2.0, boltzmann_x: 2.0 / 3.0 };
        let zs: Vec<Complex64> = (0..m).map(|_| sample_thermal_coherent(&s2, &mut rng)).collect();
        let mean = zs.iter().sum::<Complex64>() / m as f64;
        let var: f64 = zs.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (m - 1) as f64;
        assert!(mean.norm() <= 3.0 * (var / m as f64).sqrt(), "{mean}");
    }

    #[test]
    fn f_beta_values() {
        let (sys, _) = standard();
        let mode = EnvMode::new(1.0, 0.5).unwrap();
        assert_eq!(f_beta_mode(c(0.3, 1.1), &mode, &sys, 0.0), c(1.0, 0.0));
        assert!((f_beta_mode(c(0.3, 1.1), &mode, &sys, TAU / 0.5) - c(1.0, 0.0)).norm() < 1e-14);
        let v = f_beta_mode(c(1.0, 0.0), &mode, &sys, PI / 0.5);
        assert!((v - c((-2.0f64).exp(), 0.0)).norm() < 1e-15);
        assert!((v.re - 0.1353352832).abs() < 1e-10);
    }

    #[test]
    fn thermal_average_identity_by_quadrature() {
        // ∫ d²β P(β) exp[-|β|²(1 - e^{-iθ})] over the exponential law of |β|²,
        // by Gauss-Laguerre-free trapezoid quadrature on a long interval.
        let env = EnvironmentSpec::identical(1, 1.0, 1.0, 1.0 / LN_2, 1.0).unwrap();
        let n_bar = 1.0;
        for &theta in &[0.3, PI, 2.2] {
            let s = Complex64::new(1.0, 0.0) - Complex64::cis(-theta);
            let du = 1e-3;
            let steps = 60_000;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=steps {
                let u = k as f64 * du;
                let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                acc += w * (-u / n_bar).exp() / n_bar * (-u * s).exp();
            }
            acc *= du;
            let r = mode_decoherence(&env.modes[0], &env, 1.0, theta);
            assert!((acc - r).norm() < 1e-6, "{acc} vs {r}");
        }
    }

    #[test]
    fn batch_is_reproducible_and_shaped() {
        let (_, env) = standard();
        let a = SampleBatch::draw(&env, 1.0, 99, 10_000).unwrap();
        let b = SampleBatch::draw(&env, 1.0, 99, 10_000).unwrap();
        let other = SampleBatch::draw(&env, 1.0, 100, 10_000).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.betas, other.betas);
        assert_eq!(a.betas.len(), 20_000);
        assert_eq!(a.row(3).len(), 2);
        assert_eq!(SampleBatch::draw(&env, 1.0, 1, 0), Err(Error::EmptyBatch));
    }

    #[test]
    fn batch_prefix_is_stable() {
        // chunk streams make a shorter batch a prefix of a longer one
        let (_, env) = standard();
        let short = SampleBatch::draw(&env, 1.0, 5, 5000).unwrap();
        let long = SampleBatch::draw(&env, 1.0, 5, 9000).unwrap();
        assert_eq!(short.betas[..], long.betas[..short.betas.len()]);
    }

    #[test]
    fn decoupled_and_initial_estimates_are_exact() {
        let (sys, env) = standard();
        let batch = SampleBatch::draw(&env, 1.0, 3, 20_000).unwrap();
        let est = mc_reduced_amplitude(&sys, &env, 0.0, &batch).unwrap();
        assert_eq!(est.mean, sys.alpha0);
        assert_eq!(est.stderr, 0.0);

        let decoupled = EnvironmentSpec::new(
            vec![EnvMode::new(1.0, 0.0).unwrap(), EnvMode::new(1.5, 0.0).unwrap()],
            1.0,
            1.0,
        )
        .unwrap();
        let est = mc_reduced_amplitude(&sys, &decoupled, 4.2, &batch).unwrap();
        assert_eq!(est.mean, closed_amplitude(&sys, 4.2));
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn mismatched_batch_is_rejected() {
        let (sys, env) = standard();
        let batch = SampleBatch::draw(&EnvironmentSpec::identical(3, 1.0, 0.1, 1.0, 1.0).unwrap(), 1.0, 1, 10).unwrap();
        assert_eq!(
            mc_reduced_amplitude(&sys, &env, 1.0, &batch),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn mc_brackets_analytic_amplitude() {
        let (sys, env) = standard();
        let batch = SampleBatch::draw(&env, 1.0, 2024, 100_000).unwrap();
        let est = mc_reduced_amplitude(&sys, &env, 5.0, &batch).unwrap();
        let exact = open_amplitude(&sys, &env, 5.0).a_expect;
        assert!(est.brackets(exact, 3.0), "{} vs {} ± {}", est.mean, exact, est.stderr);
    }

    #[test]
    fn sample_factor_modulus_bounded() {
        let (sys, env) = standard();
        let batch = SampleBatch::draw(&env, 1.0, 11, 5_000).unwrap();
        for row in batch.rows() {
            let f: Complex64 = row.iter().zip(&env.modes).map(|(b, m)| f_beta_mode(*b, m, &sys, 17.0)).product();
            assert!(f.norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn stderr_scales_as_inverse_sqrt() {
        let (sys, env) = standard();
        let small = SampleBatch::draw(&env, 1.0, 8, 20_000).unwrap();
        let large = SampleBatch::draw(&env, 1.0, 8, 80_000).unwrap();
        let s1 = mc_decoherence_factor(&sys, &env, 10.0, &small).unwrap().stderr;
        let s4 = mc_decoherence_factor(&sys, &env, 10.0, &large).unwrap().stderr;
        let ratio = s4 / s1;
        assert!((0.4..=0.6).contains(&ratio), "{ratio}");
    }

    #[test]
    fn estimate_is_deterministic() {
        let (sys, env) = standard();
        let batch = SampleBatch::draw(&env, 1.0, 42, 30_000).unwrap();
        let a = mc_decoherence_factor(&sys, &env, 3.0, &batch).unwrap();
        let b = mc_decoherence_factor(&sys, &env, 3.0, &batch).unwrap();
        assert_eq!(a.mean.re.to_bits(), b.mean.re.to_bits());
        assert_eq!(a.mean.im.to_bits(), b.mean.im.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
