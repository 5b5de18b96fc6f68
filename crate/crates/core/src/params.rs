//! Model parameters shared by every route: the Kerr oscillator and its bath.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Kerr oscillator `H_S = ħω n + μħ² n²` prepared in the coherent state `|α₀⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega: f64,
    pub mu: f64,
    pub hbar: f64,
    pub alpha0: Complex64,
}

impl SystemParams {
    pub fn new(omega: f64, mu: f64, hbar: f64, alpha0: Complex64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(invalid("hbar", format!("must be finite and > 0, got {hbar}")));
        }
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(invalid("omega", format!("must be finite and >= 0, got {omega}")));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(invalid("mu", format!("must be finite and >= 0, got {mu}")));
        }
        if !(alpha0.re.is_finite() && alpha0.im.is_finite()) {
            return Err(invalid("alpha0", "must be finite".to_string()));
        }
        Ok(Self { omega, mu, hbar, alpha0 })
    }

    /// Mean photon number `|α₀|²` of the initial coherent state.
    pub fn mean_number(&self) -> f64 {
        self.alpha0.norm_sqr()
    }

    /// Classical action `J = ħ|α₀|²`.
    pub fn action(&self) -> f64 {
        self.hbar * self.mean_number()
    }
}

/// One bath oscillator, coupled through `g n̂ n̂_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvMode {
    pub omega: f64,
    pub g: f64,
}

impl EnvMode {
    pub fn new(omega: f64, g: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::NonPositiveFrequency(omega));
        }
        if !g.is_finite() {
            return Err(invalid("g", format!("must be finite, got {g}")));
        }
        Ok(Self { omega, g })
    }
}

/// Finite thermal bath. An empty mode list is the closed system.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub modes: Vec<EnvMode>,
    pub temperature: f64,
    pub k_b: f64,
}

impl EnvironmentSpec {
    pub fn new(modes: Vec<EnvMode>, temperature: f64, k_b: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(invalid(
                "temperature",
                format!("must be finite and >= 0, got {temperature}"),
            ));
        }
        if !(k_b.is_finite() && k_b > 0.0) {
            return Err(invalid("k_b", format!("must be finite and > 0, got {k_b}")));
        }
        for m in &modes {
            EnvMode::new(m.omega, m.g)?;
        }
        Ok(Self { modes, temperature, k_b })
    }

    /// No bath at all.
    pub fn closed() -> Self {
        Self { modes: Vec::new(), temperature: 0.0, k_b: 1.0 }
    }

    /// `n_modes` copies of the same oscillator `(omega_e, g)`.
    pub fn identical(n_modes: usize, omega_e: f64, g: f64, temperature: f64, k_b: f64) -> Result<Self> {
        let mode = EnvMode::new(omega_e, g)?;
        Self::new(vec![mode; n_modes], temperature, k_b)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Boltzmann factor `x = exp(-ħω/k_B T)`; zero temperature maps to `x = 0`.
    pub fn boltzmann_factor(&self, omega: f64, hbar: f64) -> f64 {
        if self.temperature == 0.0 {
            0.0
        } else {
            (-hbar * omega / (self.k_b * self.temperature)).exp()
        }
    }

    /// The common mode of an identical-mode bath.
    ///
    /// Modes count as identical when frequency and coupling agree with mode 0
    /// to a relative tolerance of 1e-12.
    pub fn identical_mode(&self) -> Result<EnvMode> {
        let first = *self.modes.first().ok_or(Error::EmptyBath)?;
        for (index, m) in self.modes.iter().enumerate().skip(1) {
            if !rel_eq(m.omega, first.omega) || !rel_eq(m.g, first.g) {
                return Err(Error::NonIdenticalBath { index });
            }
        }
        Ok(first)
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_hbar() {
        assert!(SystemParams::new(1.0, 0.1, 0.0, Complex64::new(1.0, 0.0)).is_err());
        assert!(SystemParams::new(1.0, -0.1, 1.0, Complex64::new(1.0, 0.0)).is_err());
        assert!(SystemParams::new(1.0, 0.0, 1.0, Complex64::new(1.0, 0.0)).is_ok());
    }

    #[test]
    fn mode_frequency_must_be_positive() {
        assert_eq!(EnvMode::new(0.0, 0.1), Err(Error::NonPositiveFrequency(0.0)));
        assert!(EnvironmentSpec::new(vec![EnvMode { omega: -1.0, g: 0.1 }], 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_temperature_boltzmann_factor_is_zero() {
        let env = EnvironmentSpec::identical(3, 1.0, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(env.boltzmann_factor(1.0, 1.0), 0.0);
    }

    #[test]
    fn identical_mode_detection() {
        let env = EnvironmentSpec::identical(4, 1.0, 0.05, 1.0, 1.0).unwrap();
        assert_eq!(env.identical_mode().unwrap(), EnvMode { omega: 1.0, g: 0.05 });
        let mixed = EnvironmentSpec::new(
            vec![EnvMode::new(1.0, 0.05).unwrap(), EnvMode::new(1.5, 0.05).unwrap()],
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(mixed.identical_mode(), Err(Error::NonIdenticalBath { index: 1 }));
        assert_eq!(EnvironmentSpec::closed().identical_mode(), Err(Error::EmptyBath));
    }
}
