//! Finite-difference embodiment of the c-number evolution equations for
//! coherent-state expectation values, `∂f/∂t = K f`.
//!
//! Fields are functions of independent variables `u` (for α), `v` (for α*),
//! and per bath mode `w_j` (β_j) and `w̄_j` (β_j*). `|α|²` and `|β_j|²` in the
//! operator coefficients are read as `uv` and `w_j w̄_j`. The built-in solution
//! fields are entire in every variable, so central differences along the real
//! axis give the complex derivatives.
//!
//! Closed system:
//!
//! ```text
//! K_α f = i(ω + ħμ + 2ħμ uv)(v∂_v - u∂_u) f + iħμ(v²∂²_v - u²∂²_u) f
//! ```
//!
//! Open system adds
//!
//! ```text
//! K_β f      = i Σ_j ω_j (w̄_j∂_{w̄_j} - w_j∂_{w_j}) f
//! K_int⁽¹⁾ f = (i/ħ)(Σ_j g_j w_j w̄_j)(v∂_v - u∂_u) f
//! K_int⁽²⁾ f = (i/ħ) uv Σ_j g_j (w̄_j∂_{w̄_j} - w_j∂_{w_j}) f
//! K_int⁽³⁾ f = (i/ħ) Σ_j g_j (v∂_v w̄_j∂_{w̄_j} - u∂_u w_j∂_{w_j}) f
//! ```

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{EnvironmentSpec, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Evaluation point in the independent coherent variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub u: Complex64,
    pub v: Complex64,
    pub w: Vec<Complex64>,
    pub w_bar: Vec<Complex64>,
}

impl PhasePoint {
    pub fn closed(u: Complex64, v: Complex64) -> Self {
        Self { u, v, w: Vec::new(), w_bar: Vec::new() }
    }

    pub fn open(u: Complex64, v: Complex64, w: Vec<Complex64>, w_bar: Vec<Complex64>) -> Result<Self> {
        if w.len() != w_bar.len() {
            return Err(Error::DimensionMismatch { expected: w.len(), found: w_bar.len() });
        }
        Ok(Self { u, v, w, w_bar })
    }

    /// Physical point: `v = u*`, `w̄_j = w_j*`.
    pub fn physical(alpha: Complex64, betas: &[Complex64]) -> Self {
        Self {
            u: alpha,
            v: alpha.conj(),
            w: betas.to_vec(),
            w_bar: betas.iter().map(|b| b.conj()).collect(),
        }
    }

    pub fn n_env_modes(&self) -> usize {
        self.w.len()
    }

    fn shifted(&self, var: Var, delta: f64) -> Self {
        let mut p = self.clone();
        match var {
            Var::U => p.u += delta,
            Var::V => p.v += delta,
            Var::W(j) => p.w[j] += delta,
            Var::WBar(j) => p.w_bar[j] += delta,
        }
        p
    }
}

#[derive(Debug, Clone, Copy)]
enum Var {
    U,
    V,
    W(usize),
    WBar(usize),
}

/// A complex field `f(u, v, {w_j}, {w̄_j}; t)`.
pub trait CNumberField: Sync {
    fn n_env_modes(&self) -> usize;
    fn eval(&self, point: &PhasePoint, t: f64) -> Complex64;
}

/// Field backed by a closure.
pub struct FnField<F> {
    n_env_modes: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&PhasePoint, f64) -> Complex64 + Sync,
{
    pub fn new(n_env_modes: usize, f: F) -> Self {
        Self { n_env_modes, f }
    }
}

impl<F> CNumberField for FnField<F>
where
    F: Fn(&PhasePoint, f64) -> Complex64 + Sync,
{
    fn n_env_modes(&self) -> usize {
        self.n_env_modes
    }

    fn eval(&self, point: &PhasePoint, t: f64) -> Complex64 {
        (self.f)(point, t)
    }
}

/// `f_α = u e^{-i(ω+μħ)t} exp[uv(e^{-2iμħt} - 1)]`, the evolved amplitude
/// `⟨α|a(t)|α⟩` with `α*` freed to `v`.
#[derive(Debug, Clone, Copy)]
pub struct ClosedSolutionField {
    pub sys: SystemParams,
}

impl ClosedSolutionField {
    fn kerr(&self, t: f64) -> Complex64 {
        Complex64::cis(-2.0 * self.sys.mu * self.sys.hbar * t)
    }

    pub fn value(&self, u: Complex64, v: Complex64, t: f64) -> Complex64 {
        let s = &self.sys;
        let e = self.kerr(t);
        u * Complex64::cis(-(s.omega + s.mu * s.hbar) * t) * (u * v * (e - 1.0)).exp()
    }

    /// `∂_t f_α / f_α = -i(ω + μħ + 2μħ uv e^{-2iμħt})`.
    pub fn log_rate(&self, u: Complex64, v: Complex64, t: f64) -> Complex64 {
        let s = &self.sys;
        -I * (s.omega + s.mu * s.hbar + 2.0 * s.mu * s.hbar * u * v * self.kerr(t))
    }
}

impl CNumberField for ClosedSolutionField {
    fn n_env_modes(&self) -> usize {
        0
    }

    fn eval(&self, point: &PhasePoint, t: f64) -> Complex64 {
        self.value(point.u, point.v, t)
    }
}

/// `f = f_α · Π_j exp[-w_j w̄_j (1 - e^{-i g_j t/ħ})]`, the exact solution of
/// the open-system equation for the amplitude with coherent bath states.
#[derive(Debug, Clone)]
pub struct OpenSolutionField {
    pub closed: ClosedSolutionField,
    pub env: EnvironmentSpec,
}

impl OpenSolutionField {
    pub fn new(sys: SystemParams, env: EnvironmentSpec) -> Self {
        Self { closed: ClosedSolutionField { sys }, env }
    }

    /// Bath part `f_β` alone.
    pub fn bath_factor(&self, point: &PhasePoint, t: f64) -> Complex64 {
        let hbar = self.closed.sys.hbar;
        self.env
            .modes
            .iter()
            .zip(point.w.iter().zip(&point.w_bar))
            .map(|(m, (w, wb))| {
                let s = 1.0 - Complex64::cis(-m.g * t / hbar);
                (-w * wb * s).exp()
            })
            .product()
    }

    /// Analytic `∂f/∂t`.
    pub fn time_derivative_exact(&self, point: &PhasePoint, t: f64) -> Complex64 {
        let hbar = self.closed.sys.hbar;
        let bath_rate: Complex64 = self
            .env
            .modes
            .iter()
            .zip(point.w.iter().zip(&point.w_bar))
            .map(|(m, (w, wb))| -I * (m.g / hbar) * w * wb * Complex64::cis(-m.g * t / hbar))
            .sum();
        (self.closed.log_rate(point.u, point.v, t) + bath_rate) * self.eval(point, t)
    }
}

impl CNumberField for OpenSolutionField {
    fn n_env_modes(&self) -> usize {
        self.env.n_modes()
    }

    fn eval(&self, point: &PhasePoint, t: f64) -> Complex64 {
        self.closed.value(point.u, point.v, t) * self.bath_factor(point, t)
    }
}

/// Central-difference steps in the coherent variables (`h`) and time (`dt`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilSpec {
    pub h: f64,
    pub dt: f64,
}

impl Default for StencilSpec {
    fn default() -> Self {
        Self { h: 1e-4, dt: 1e-4 }
    }
}

impl StencilSpec {
    pub fn new(h: f64, dt: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter { name: "h", reason: format!("must be > 0, got {h}") });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be > 0, got {dt}") });
        }
        Ok(Self { h, dt })
    }
}

fn d1<F: CNumberField + ?Sized>(f: &F, p: &PhasePoint, t: f64, var: Var, h: f64) -> Complex64 {
    (f.eval(&p.shifted(var, h), t) - f.eval(&p.shifted(var, -h), t)) / (2.0 * h)
}

fn d2<F: CNumberField + ?Sized>(f: &F, p: &PhasePoint, t: f64, var: Var, h: f64, f0: Complex64) -> Complex64 {
    (f.eval(&p.shifted(var, h), t) - 2.0 * f0 + f.eval(&p.shifted(var, -h), t)) / (h * h)
}

fn d11<F: CNumberField + ?Sized>(f: &F, p: &PhasePoint, t: f64, a: Var, b: Var, h: f64) -> Complex64 {
    let pp = f.eval(&p.shifted(a, h).shifted(b, h), t);
    let pm = f.eval(&p.shifted(a, h).shifted(b, -h), t);
    let mp = f.eval(&p.shifted(a, -h).shifted(b, h), t);
    let mm = f.eval(&p.shifted(a, -h).shifted(b, -h), t);
    (pp - pm - mp + mm) / (4.0 * h * h)
}

/// Centred time derivative of `f`.
pub fn time_derivative<F: CNumberField + ?Sized>(f: &F, point: &PhasePoint, t: f64, stencil: &StencilSpec) -> Complex64 {
    let dt = stencil.dt;
    (f.eval(point, t + dt) - f.eval(point, t - dt)) / (2.0 * dt)
}

/// Pieces shared between the system terms.
struct SystemDerivs {
    /// `(v∂_v - u∂_u) f`
    rotation: Complex64,
    /// `(v²∂²_v - u²∂²_u) f`
    curvature: Complex64,
}

fn system_derivs<F: CNumberField + ?Sized>(f: &F, p: &PhasePoint, t: f64, h: f64) -> SystemDerivs {
    let f0 = f.eval(p, t);
    let du = d1(f, p, t, Var::U, h);
    let dv = d1(f, p, t, Var::V, h);
    let duu = d2(f, p, t, Var::U, h, f0);
    let dvv = d2(f, p, t, Var::V, h, f0);
    SystemDerivs {
        rotation: p.v * dv - p.u * du,
        curvature: p.v * p.v * dvv - p.u * p.u * duu,
    }
}

fn k_alpha_from(d: &SystemDerivs, p: &PhasePoint, sys: &SystemParams) -> Complex64 {
    let hm = sys.hbar * sys.mu;
    I * (sys.omega + hm + 2.0 * hm * p.u * p.v) * d.rotation + I * hm * d.curvature
}

/// Closed-system operator `K_α f` at a point without bath coordinates.
pub fn apply_k_closed<F: CNumberField + ?Sized>(
    f: &F,
    point: &PhasePoint,
    t: f64,
    sys: &SystemParams,
    stencil: &StencilSpec,
) -> Result<Complex64> {
    if point.n_env_modes() != 0 || f.n_env_modes() != 0 {
        return Err(Error::DimensionMismatch { expected: 0, found: point.n_env_modes().max(f.n_env_modes()) });
    }
    let d = system_derivs(f, point, t, stencil.h);
    Ok(k_alpha_from(&d, point, sys))
}

/// The five terms of the open-system operator applied to `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorTerms {
    pub k_alpha: Complex64,
    pub k_beta: Complex64,
    pub k_int1: Complex64,
    pub k_int2: Complex64,
    pub k_int3: Complex64,
}

impl OperatorTerms {
    pub fn interaction(&self) -> Complex64 {
        self.k_int1 + self.k_int2 + self.k_int3
    }

    pub fn total(&self) -> Complex64 {
        self.k_alpha + self.k_beta + self.interaction()
    }
}

pub fn open_operator_terms<F: CNumberField + ?Sized>(
    f: &F,
    point: &PhasePoint,
    t: f64,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    stencil: &StencilSpec,
) -> Result<OperatorTerms> {
    let n = env.n_modes();
    for found in [point.w.len(), point.w_bar.len(), f.n_env_modes()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    let h = stencil.h;
    let p = point;
    let d = system_derivs(f, p, t, h);
    let k_alpha = k_alpha_from(&d, p, sys);

    let ih = I / sys.hbar;
    let uv = p.u * p.v;
    let mut k_beta = Complex64::new(0.0, 0.0);
    let mut occupation = Complex64::new(0.0, 0.0);
    let mut bath_rotation = Complex64::new(0.0, 0.0);
    let mut mixed = Complex64::new(0.0, 0.0);
    for (j, m) in env.modes.iter().enumerate() {
        let dw = d1(f, p, t, Var::W(j), h);
        let dwb = d1(f, p, t, Var::WBar(j), h);
        let rot_j = p.w_bar[j] * dwb - p.w[j] * dw;
        k_beta += m.omega * rot_j;
        bath_rotation += m.g * rot_j;
        occupation += m.g * p.w[j] * p.w_bar[j];
        let dv_dwb = d11(f, p, t, Var::V, Var::WBar(j), h);
        let du_dw = d11(f, p, t, Var::U, Var::W(j), h);
        mixed += m.g * (p.v * p.w_bar[j] * dv_dwb - p.u * p.w[j] * du_dw);
    }

    Ok(OperatorTerms {
        k_alpha,
        k_beta: I * k_beta,
        k_int1: ih * occupation * d.rotation,
        k_int2: ih * uv * bath_rotation,
        k_int3: ih * mixed,
    })
}

/// Full open-system operator `(K_α + K_β + K_int) f`.
pub fn apply_k_open<F: CNumberField + ?Sized>(
    f: &F,
    point: &PhasePoint,
    t: f64,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    stencil: &StencilSpec,
) -> Result<Complex64> {
    Ok(open_operator_terms(f, point, t, sys, env, stencil)?.total())
}

/// `|∂_t f - K f|` with both sides by central differences. Uses the closed
/// operator when the bath is empty.
pub fn pde_residual<F: CNumberField + ?Sized>(
    f: &F,
    point: &PhasePoint,
    t: f64,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    stencil: &StencilSpec,
) -> Result<f64> {
    Ok(residual_parts(f, point, t, sys, env, stencil)?.0)
}

/// Residual and the local scale `max(|∂_t f|, |f|)` it is measured against.
fn residual_parts<F: CNumberField + ?Sized>(
    f: &F,
    point: &PhasePoint,
    t: f64,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    stencil: &StencilSpec,
) -> Result<(f64, f64)> {
    let k = if env.n_modes() == 0 && point.n_env_modes() == 0 {
        apply_k_closed(f, point, t, sys, stencil)?
    } else {
        apply_k_open(f, point, t, sys, env, stencil)?
    };
    let dfdt = time_derivative(f, point, t, stencil);
    let scale = dfdt.norm().max(f.eval(point, t).norm()).max(f64::MIN_POSITIVE);
    Ok(((dfdt - k).norm(), scale))
}

/// One evaluation point of a residual grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub point: PhasePoint,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    pub points: usize,
    pub max_abs_residual: f64,
    /// Largest residual relative to `max(|∂_t f|, |f|)` at its point.
    pub max_rel_residual: f64,
}

/// Residual statistics of an arbitrary field over a grid.
pub fn verify_field<F: CNumberField + ?Sized>(
    f: &F,
    sys: &SystemParams,
    env: &EnvironmentSpec,
    grid: &[GridPoint],
    stencil: &StencilSpec,
) -> Result<ResidualReport> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let parts: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|g| residual_parts(f, &g.point, g.t, sys, env, stencil))
        .collect::<Result<_>>()?;
    let (max_abs_residual, max_rel_residual) = parts
        .iter()
        .fold((0.0f64, 0.0f64), |(a, r), &(res, scale)| (a.max(res), r.max(res / scale)));
    Ok(ResidualReport { points: grid.len(), max_abs_residual, max_rel_residual })
}

/// Residual of the exact product solution `f_α f_β` over a grid.
pub fn verify_exact_solution(
    sys: &SystemParams,
    env: &EnvironmentSpec,
    grid: &[GridPoint],
    stencil: &StencilSpec,
) -> Result<ResidualReport> {
    let field = OpenSolutionField::new(*sys, env.clone());
    verify_field(&field, sys, env, grid, stencil)
}
