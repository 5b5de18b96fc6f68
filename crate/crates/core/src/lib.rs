//! Open Kerr oscillator with density-density coupling to a finite thermal
//! bosonic bath.
//!
//! The coherent amplitude `⟨a(t)⟩` is available through five independent
//! routes that cross-check each other:
//!
//! * [`analytic`]: closed-form amplitude and decoherence factors;
//! * [`fock`]: truncated number-basis sums;
//! * [`thermal`]: Monte-Carlo averaging over the bath's P-representation;
//! * [`perturbative`]: second-order short-time and central-limit reductions;
//! * [`pde`]: finite-difference residuals of the c-number evolution equations.
//!
//! [`cli`] drives scenarios from a TOML file and writes CSV/JSON output.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod fock;
pub mod params;
pub mod pde;
pub mod perturbative;
pub mod thermal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use params::{EnvMode, EnvironmentSpec, SystemParams};
