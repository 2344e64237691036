//! One-port driven cavity: reflection spectrum, pulsed response,
//! Lorentzian spectroscopy and the over/under-coupling ambiguity.
//!
//! Rates are linear frequencies in Hz (kappa / 2 pi). The intracavity
//! amplitude obeys
//!
//! ```text
//! da/dt = (i 2 pi Delta - pi kappa_tot) a + sqrt(2 pi kappa_ext) s(t)
//! out   = s(t) - sqrt(2 pi kappa_ext) a
//! ```
//!
//! with `s` the drive amplitude in sqrt(photons / s).

mod beta;
mod pulse;
mod spectroscopy;

pub use beta::{disambiguate_beta, BetaOutcome, BetaResolution, ResponseTrace};
pub use pulse::{pulse_response, pulse_response_with_step, PulseDrive};
pub use spectroscopy::{fit_cavity_spectroscopy, SpectroscopyFit, SpectroscopyPoint};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    pub nu_c_hz: f64,
    /// External (antenna) coupling rate, kappa_ext / 2 pi [Hz].
    pub kappa_ext_hz: f64,
    /// Internal loss rate, kappa_int / 2 pi [Hz].
    pub kappa_int_hz: f64,
}

impl CavityMode {
    pub fn new(nu_c_hz: f64, kappa_ext_hz: f64, kappa_int_hz: f64) -> Result<Self> {
        let mode = Self {
            nu_c_hz,
            kappa_ext_hz,
            kappa_int_hz,
        };
        mode.validate()?;
        Ok(mode)
    }

    /// From the internal quality factor and coupling coefficient.
    pub fn from_q0_beta(nu_c_hz: f64, q0: f64, beta: f64) -> Result<Self> {
        let kappa_int = nu_c_hz / q0;
        Self::new(nu_c_hz, beta * kappa_int, kappa_int)
    }

    /// From the loaded quality factor and coupling coefficient.
    pub fn from_ql_beta(nu_c_hz: f64, q_l: f64, beta: f64) -> Result<Self> {
        let kappa = nu_c_hz / q_l;
        Self::new(nu_c_hz, kappa * beta / (1.0 + beta), kappa / (1.0 + beta))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu_c_hz > 0.0) {
            return Err(Error::config("nu_c_hz", "must be positive"));
        }
        if !(self.kappa_ext_hz >= 0.0 && self.kappa_int_hz >= 0.0) {
            return Err(Error::config("kappa", "rates must be non-negative"));
        }
        if self.kappa_total() <= 0.0 {
            return Err(Error::config("kappa", "total linewidth must be positive"));
        }
        Ok(())
    }

    pub fn kappa_total(&self) -> f64 {
        self.kappa_ext_hz + self.kappa_int_hz
    }

    pub fn beta(&self) -> f64 {
        self.kappa_ext_hz / self.kappa_int_hz
    }

    pub fn q0(&self) -> f64 {
        self.nu_c_hz / self.kappa_int_hz
    }

    pub fn q_loaded(&self) -> f64 {
        self.nu_c_hz / self.kappa_total()
    }

    /// The mode with the same loaded Q and inverted coupling (beta -> 1/beta).
    pub fn coupling_mirror(&self) -> Self {
        Self {
            nu_c_hz: self.nu_c_hz,
            kappa_ext_hz: self.kappa_int_hz,
            kappa_int_hz: self.kappa_ext_hz,
        }
    }

    /// Complex reflection coefficient at detuning `delta` [Hz].
    pub fn reflection(&self, delta: f64) -> Complex64 {
        let half = 0.5 * self.kappa_total();
        let num = Complex64::new(half - self.kappa_ext_hz, -delta);
        let den = Complex64::new(half, -delta);
        num / den
    }
}

/// |Gamma(Delta)|^2 for a one-port cavity.
pub fn reflection_mag2(delta: f64, mode: &CavityMode) -> f64 {
    let diff = mode.kappa_int_hz - mode.kappa_ext_hz;
    let sum = mode.kappa_total();
    let d2 = delta * delta;
    let den = 0.25 * sum * sum + d2;
    if den == 0.0 {
        return 1.0;
    }
    (0.25 * diff * diff + d2) / den
}

/// Depth of the reflection dip, 1 - |Gamma(0)|^2 = 4 beta / (1 + beta)^2.
pub fn dip_depth(beta: f64) -> f64 {
    4.0 * beta / ((1.0 + beta) * (1.0 + beta))
}

/// The two coupling coefficients (over, under) compatible with a dip depth.
pub fn beta_pair_from_depth(depth: f64) -> (f64, f64) {
    if depth >= 1.0 {
        return (1.0, 1.0);
    }
    let over = (2.0 - depth + 2.0 * (1.0 - depth).sqrt()) / depth;
    (over, 1.0 / over)
}
