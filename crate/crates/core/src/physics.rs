//! Axion signal power, photon rates, thermal occupancy, coupling conversions,
//! scan rate, and the photon-counting versus linear-amplifier comparison.
//!
//! Inputs and outputs are SI. The resonant power and scan-rate formulas are
//! evaluated in natural units through [`crate::constants::natural`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::{self, natural, BOLTZMANN, FINE_STRUCTURE, PLANCK};
use crate::error::{Error, Result};
use crate::special;

/// KSVZ benchmark model coupling.
pub const G_GAMMA_KSVZ: f64 = -0.97;
/// DFSZ benchmark model coupling.
pub const G_GAMMA_DFSZ: f64 = 0.36;

/// Magnet, cavity and axion-model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HaloscopeConfig {
    /// Dimensionless model coupling g_gamma.
    pub g_gamma: f64,
    /// Local dark-matter density.
    pub rho_a_gev_per_cm3: f64,
    /// Hadronic scale Lambda.
    pub lambda_mev: f64,
    pub b0_tesla: f64,
    pub volume_liters: f64,
    /// TM010 form factor C010.
    pub form_factor: f64,
    pub nu_c_hz: f64,
    /// Internal (unloaded) quality factor.
    pub q0: f64,
    /// Antenna coupling coefficient.
    pub beta: f64,
    /// Axion signal quality factor.
    #[serde(default = "default_q_a")]
    pub q_a: f64,
    /// Optional loaded Q; when present it must agree with q0 / (1 + beta).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_loaded: Option<f64>,
}

fn default_q_a() -> f64 {
    1e6
}

impl Default for HaloscopeConfig {
    fn default() -> Self {
        Self::paper2024()
    }
}

impl HaloscopeConfig {
    /// The 7.37 GHz photon-counting haloscope: 2 T, 0.1 l, C010 = 0.64,
    /// beta = 3, Q_L = 2.25e5, KSVZ coupling.
    pub fn paper2024() -> Self {
        Self {
            g_gamma: G_GAMMA_KSVZ,
            rho_a_gev_per_cm3: 0.45,
            lambda_mev: 78.0,
            b0_tesla: 2.0,
            volume_liters: 0.1,
            form_factor: 0.64,
            nu_c_hz: 7.3696e9,
            q0: 2.25e5 * 4.0,
            beta: 3.0,
            q_a: 1e6,
            q_loaded: None,
        }
    }

    /// Builds a configuration from a loaded quality factor.
    pub fn with_loaded_q(mut self, q_loaded: f64) -> Self {
        self.q0 = q_loaded * (1.0 + self.beta);
        self.q_loaded = None;
        self
    }

    pub fn q_l(&self) -> f64 {
        self.q0 / (1.0 + self.beta)
    }

    /// Cavity linewidth nu_c / Q_L [Hz].
    pub fn cavity_linewidth(&self) -> f64 {
        self.nu_c_hz / self.q_l()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_a_gev_per_cm3", self.rho_a_gev_per_cm3),
            ("lambda_mev", self.lambda_mev),
            ("volume_liters", self.volume_liters),
            ("form_factor", self.form_factor),
            ("nu_c_hz", self.nu_c_hz),
            ("q0", self.q0),
            ("beta", self.beta),
            ("q_a", self.q_a),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.b0_tesla.is_finite() && self.b0_tesla >= 0.0) {
            return Err(Error::config("b0_tesla", "must be non-negative"));
        }
        if !self.g_gamma.is_finite() {
            return Err(Error::config("g_gamma", "must be finite"));
        }
        if self.form_factor > 1.0 {
            return Err(Error::config("form_factor", "C010 cannot exceed 1"));
        }
        if let Some(ql) = self.q_loaded {
            let derived = self.q_l();
            if ((ql - derived) / derived).abs() > 1e-9 {
                return Err(Error::config(
                    "q_loaded",
                    format!("q0/(1+beta) = {derived} disagrees with q_loaded = {ql}"),
                ));
            }
        }
        Ok(())
    }
}

/// Detector figures of merit entering the SNR comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorFigures {
    /// Operational efficiency.
    pub eta: f64,
    /// Total dark-count rate [1/s].
    pub gamma_dc: f64,
    /// Intrinsic dark-count rate [1/s].
    pub gamma_int: f64,
    /// Input-line thermal occupancy.
    pub n_th: f64,
    /// Effective detector bandwidth [Hz].
    pub dnu_det_hz: f64,
    /// Axion signal linewidth [Hz].
    pub dnu_a_hz: f64,
}

impl Default for DetectorFigures {
    fn default() -> Self {
        Self::paper2024()
    }
}

impl DetectorFigures {
    /// eta = 0.46, Gamma_dc = 85 /s, Gamma_int = 10 /s, 7.3 kHz axion linewidth.
    pub fn paper2024() -> Self {
        Self {
            eta: 0.46,
            gamma_dc: 85.0,
            gamma_int: 10.0,
            n_th: 1.0e-3,
            dnu_det_hz: 0.7e6 / 4.0,
            dnu_a_hz: 7.3e3,
        }
    }

    /// Thermal part of the dark count, eta * dnu_det * n_th.
    pub fn gamma_thermal(&self) -> f64 {
        self.eta * self.dnu_det_hz * self.n_th
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config("eta", "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("gamma_dc", self.gamma_dc),
            ("gamma_int", self.gamma_int),
            ("n_th", self.n_th),
            ("dnu_det_hz", self.dnu_det_hz),
            ("dnu_a_hz", self.dnu_a_hz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, "must be non-negative"));
            }
        }
        if self.gamma_int > self.gamma_dc {
            return Err(Error::config("gamma_int", "cannot exceed gamma_dc"));
        }
        Ok(())
    }
}

/// How the detector bandwidth `kappa / 4` is read off a buffer linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaReading {
    /// kappa given as kappa/2pi in Hz; bandwidth = kappa / 4.
    LinearHz,
    /// Literal "2pi/4 x kappa" with kappa in Hz.
    AngularLiteral,
}

/// Effective detector bandwidth from the buffer linewidth [Hz].
pub fn detector_bandwidth(kappa_hz: f64, reading: KappaReading) -> f64 {
    match reading {
        KappaReading::LinearHz => kappa_hz / 4.0,
        KappaReading::AngularLiteral => 2.0 * PI / 4.0 * kappa_hz,
    }
}

/// Bose-Einstein occupancy 1 / (exp(h nu / k_B T) - 1).
pub fn thermal_occupation(nu: f64, temperature: f64) -> Result<f64> {
    if !(nu > 0.0 && temperature > 0.0) {
        return Err(Error::domain(format!(
            "thermal occupation needs nu > 0 and T > 0 (got {nu}, {temperature})"
        )));
    }
    Ok(1.0 / (PLANCK * nu / (BOLTZMANN * temperature)).exp_m1())
}

/// Temperature at which a mode at `nu` has occupancy `n`.
pub fn occupation_temperature(nu: f64, n: f64) -> Result<f64> {
    if !(nu > 0.0 && n > 0.0) {
        return Err(Error::domain("need nu > 0 and n > 0"));
    }
    Ok(PLANCK * nu / (BOLTZMANN * (1.0 / n).ln_1p()))
}

/// Axion power extracted by the antenna at resonance [W].
pub fn axion_signal_power(cfg: &HaloscopeConfig) -> Result<f64> {
    cfg.validate()?;
    let q_l = cfg.q_l();
    let omega_ev = constants::hz_to_ev(cfg.nu_c_hz);
    let rho = natural::gev_per_cm3_to_ev4(cfg.rho_a_gev_per_cm3);
    let lambda4 = (cfg.lambda_mev * 1e6).powi(4);
    let b = natural::tesla_to_ev2(cfg.b0_tesla);
    let v = natural::m3_to_inv_ev3(cfg.volume_liters * 1e-3);
    let p = cfg.g_gamma.powi(2) * FINE_STRUCTURE.powi(2) / (PI * PI) * rho / lambda4
        * cfg.beta / (1.0 + cfg.beta)
        * omega_ev
        * b * b
        * v
        * cfg.form_factor
        * (cfg.q_a * q_l / (cfg.q_a + q_l));
    Ok(natural::ev2_to_watt(p))
}

/// Signal photon rate P_a / (h nu_c) [1/s].
pub fn signal_photon_rate(cfg: &HaloscopeConfig) -> Result<f64> {
    Ok(axion_signal_power(cfg)? / constants::photon_energy(cfg.nu_c_hz))
}

/// Power the lab-practical scaling law gives for `cfg` (0.72 yW reference at
/// KSVZ, 2 T, 0.11 l, 7.37 GHz, Q_L = 225000, C010 = 0.64, beta = 3).
pub fn practical_signal_power(cfg: &HaloscopeConfig) -> f64 {
    0.72e-24
        * (cfg.g_gamma / 0.97).powi(2)
        * (cfg.rho_a_gev_per_cm3 / 0.45)
        * (cfg.b0_tesla / 2.0).powi(2)
        * (cfg.volume_liters / 0.11)
        * (cfg.nu_c_hz / 7.37e9)
        * (cfg.q_l() / 225_000.0)
        * (cfg.form_factor / 0.64)
}

/// Either an axion mass or a frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxionScale {
    MassEv(f64),
    FrequencyHz(f64),
}

/// Mass, frequency, PQ scale and the coupling per unit g_gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingScales {
    pub m_a_ev: f64,
    pub nu_a_hz: f64,
    pub f_a_gev: f64,
    /// g_agg / g_gamma = alpha / (pi f_a) [1/GeV].
    pub g_per_g_gamma: f64,
}

pub fn coupling_conversions(input: AxionScale) -> Result<CouplingScales> {
    let (m_a_ev, nu_a_hz) = match input {
        AxionScale::MassEv(m) => (m, constants::ev_to_hz(m)),
        AxionScale::FrequencyHz(nu) => (constants::hz_to_ev(nu), nu),
    };
    if !(m_a_ev.is_finite() && m_a_ev > 0.0) {
        return Err(Error::domain("axion mass/frequency must be positive"));
    }
    let f_a_gev = 1e12 * constants::FA_MA_PRODUCT_UEV / (m_a_ev * 1e6);
    Ok(CouplingScales {
        m_a_ev,
        nu_a_hz,
        f_a_gev,
        g_per_g_gamma: FINE_STRUCTURE / (PI * f_a_gev),
    })
}

/// Standard-halo axion lineshape: Maxwell-Boltzmann kinetic-energy spread
/// above the rest-mass frequency.
///
/// With `x = nu - nu_a` the density is a Gamma(3/2, theta) law with
/// `theta = nu_a <v^2> / (3 c^2)`. The default `<v^2>/c^2 = 1/Q_a` puts the
/// mean kinetic offset at `nu_a / (2 Q_a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxionLineshape {
    pub nu_a_hz: f64,
    /// Mean squared halo velocity in units of c^2.
    pub v2_over_c2: f64,
}

impl AxionLineshape {
    pub fn from_quality(nu_a_hz: f64, q_a: f64) -> Self {
        Self {
            nu_a_hz,
            v2_over_c2: 1.0 / q_a,
        }
    }

    fn theta(&self) -> f64 {
        self.nu_a_hz * self.v2_over_c2 / 3.0
    }

    /// Spectral density [1/Hz].
    pub fn density(&self, nu: f64) -> f64 {
        axion_lineshape(nu, self)
    }

    /// Fraction of power below `nu`.
    pub fn cdf(&self, nu: f64) -> f64 {
        let x = nu - self.nu_a_hz;
        if x <= 0.0 {
            return 0.0;
        }
        special::gamma_p_three_halves(x / self.theta())
    }

    /// Width above nu_a containing fraction `p` of the power.
    pub fn containing_width(&self, p: f64) -> f64 {
        let theta = self.theta();
        let (mut lo, mut hi) = (0.0, 100.0 * theta);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if special::gamma_p_three_halves(mid / theta) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Normalized axion spectral density at `nu` [1/Hz]; zero below the rest mass.
pub fn axion_lineshape(nu: f64, shape: &AxionLineshape) -> f64 {
    let x = nu - shape.nu_a_hz;
    if x <= 0.0 {
        return 0.0;
    }
    let theta = shape.theta();
    2.0 / PI.sqrt() * (x / theta).sqrt() / theta * (-x / theta).exp()
}

/// Haloscope scan rate df/dt [Hz/s] at signal-to-noise target `snr` with
/// system noise `n_sys_j` (k_B T_s, joules).
pub fn scan_rate(cfg: &HaloscopeConfig, snr: f64, n_sys_j: f64) -> Result<f64> {
    cfg.validate()?;
    if !(snr > 0.0 && n_sys_j > 0.0) {
        return Err(Error::domain("scan rate needs snr > 0 and N_sys > 0"));
    }
    let m_a = constants::hz_to_ev(cfg.nu_c_hz);
    let g_agg = cfg.g_gamma * FINE_STRUCTURE * m_a / (PI * (cfg.lambda_mev * 1e6).powi(2));
    let rho = natural::gev_per_cm3_to_ev4(cfg.rho_a_gev_per_cm3);
    let b = natural::tesla_to_ev2(cfg.b0_tesla);
    let v = natural::m3_to_inv_ev3(cfg.volume_liters * 1e-3);
    let n_sys = n_sys_j / constants::ELEMENTARY_CHARGE;
    let q_l = cfg.q_l();
    let coupling = cfg.beta / (1.0 + cfg.beta);
    let rate_ev2 = g_agg.powi(4) / (snr * snr) * rho * rho / (m_a * m_a)
        * b.powi(4)
        * cfg.form_factor.powi(2)
        * v * v
        / (n_sys * n_sys)
        * coupling * coupling
        * q_l * cfg.q_a.powi(2) / (q_l + cfg.q_a);
    let per_s = natural::ev_to_inv_s(1.0);
    Ok(rate_ev2 * per_s * per_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Linear amplifier at the standard quantum limit.
    Sql,
    /// Photon counter.
    Counter,
}

/// Signal-to-noise after integrating for `t` seconds.
pub fn detection_snr(
    mode: DetectionMode,
    p_a: f64,
    nu_a: f64,
    t: f64,
    det: &DetectorFigures,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("integration time must be positive"));
    }
    let photons = p_a / constants::photon_energy(nu_a);
    Ok(match mode {
        DetectionMode::Sql => photons * (t / det.dnu_a_hz).sqrt(),
        DetectionMode::Counter => {
            let signal = det.eta * photons * t;
            let var = det.gamma_dc * t + signal;
            if var <= 0.0 {
                0.0
            } else {
                signal / var.sqrt()
            }
        }
    })
}

/// Counter SNR neglecting the signal's own shot noise.
pub fn counter_snr_without_shot_noise(p_a: f64, nu_a: f64, t: f64, det: &DetectorFigures) -> f64 {
    det.eta * p_a / constants::photon_energy(nu_a) * (t / det.gamma_dc).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Speedup {
    /// t_SQL / t_PC = eta^2 dnu_a / Gamma_dc.
    pub r: f64,
    /// Thermal-limited gain eta dnu_a / (n_th dnu_c).
    pub r_thermal: f64,
}

pub fn speedup(det: &DetectorFigures, dnu_c_hz: f64) -> Speedup {
    let r = if det.gamma_dc > 0.0 {
        det.eta * det.eta * det.dnu_a_hz / det.gamma_dc
    } else {
        log::warn!("zero dark-count rate: speedup is unbounded");
        f64::INFINITY
    };
    let denom = det.n_th * dnu_c_hz;
    let r_thermal = if denom > 0.0 {
        det.eta * det.dnu_a_hz / denom
    } else {
        log::warn!("zero thermal occupancy or cavity linewidth: thermal speedup is unbounded");
        f64::INFINITY
    };
    Speedup { r, r_thermal }
}

/// Integration time needed to reach `snr` [s] (signal shot noise neglected).
pub fn measurement_time(
    mode: DetectionMode,
    p_a: f64,
    nu_a: f64,
    snr: f64,
    det: &DetectorFigures,
) -> Result<f64> {
    if !(p_a > 0.0) {
        return Err(Error::domain("signal power must be positive"));
    }
    let x = constants::photon_energy(nu_a) * snr / p_a;
    Ok(match mode {
        DetectionMode::Sql => det.dnu_a_hz * x * x,
        DetectionMode::Counter => det.gamma_dc / (det.eta * det.eta) * x * x,
    })
}
