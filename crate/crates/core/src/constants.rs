//! Physical constants (CODATA 2018) and the single natural-units boundary.
//!
//! Everything outside this module works in SI: W, Hz, s, T, K. The axion
//! power formula is written in natural Heaviside-Lorentz units
//! (hbar = c = 1), so the conversions it needs live here and nowhere else.

use std::f64::consts::PI;

/// Planck constant [J s] (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant [J s].
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant [J/K] (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge [C] (exact); also J per eV.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Speed of light [m/s] (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Fine-structure constant.
pub const FINE_STRUCTURE: f64 = 7.297_352_569_3e-3;
/// Vacuum permeability [N/A^2].
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Axion mass times Peccei-Quinn scale: f_a / 1e12 GeV = 5.691 ueV / m_a.
pub const FA_MA_PRODUCT_UEV: f64 = 5.691;

/// hbar*c in eV m.
pub fn hbar_c_ev_m() -> f64 {
    HBAR * SPEED_OF_LIGHT / ELEMENTARY_CHARGE
}

/// Energy of a photon of frequency `nu` [Hz], in joules.
pub fn photon_energy(nu: f64) -> f64 {
    PLANCK * nu
}

/// Photon energy in eV.
pub fn hz_to_ev(nu: f64) -> f64 {
    PLANCK * nu / ELEMENTARY_CHARGE
}

pub fn ev_to_hz(e: f64) -> f64 {
    e * ELEMENTARY_CHARGE / PLANCK
}

/// Conversions between SI quantities and natural (HL, hbar = c = 1) units in eV powers.
pub mod natural {
    use super::*;

    /// Magnetic field [T] to eV^2.
    pub fn tesla_to_ev2(b: f64) -> f64 {
        b * ((HBAR * SPEED_OF_LIGHT).powi(3) / MU0).sqrt() / (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE)
    }

    /// Volume [m^3] to eV^-3.
    pub fn m3_to_inv_ev3(v: f64) -> f64 {
        v / hbar_c_ev_m().powi(3)
    }

    /// Energy density [GeV/cm^3] to eV^4.
    pub fn gev_per_cm3_to_ev4(rho: f64) -> f64 {
        rho * 1e9 * (hbar_c_ev_m() * 100.0).powi(3)
    }

    /// Power expressed in eV^2 to watts.
    pub fn ev2_to_watt(p: f64) -> f64 {
        p * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / HBAR
    }

    /// Rate/frequency in eV (as hbar*omega) to s^-1 (angular).
    pub fn ev_to_inv_s(e: f64) -> f64 {
        e * ELEMENTARY_CHARGE / HBAR
    }
}
