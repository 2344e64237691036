//! Dispersive-qubit calibration of the input line: the Stark shift and
//! measurement-induced dephasing of a qubit under a coherent drive of the
//! input resonator, their fit, the absolute photon flux they imply, and the
//! detector efficiency that follows from a click-rate excess.
//!
//! Rates are given as ordinary frequencies (angular value / 2 pi) in Hz.

mod io;

pub use io::{read_observations, write_calibration_report, write_observations, CalibrationReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::photon_energy;
use crate::error::{Error, Result};
use crate::lm::{levenberg_marquardt, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersiveParams {
    /// Total decay rate of the input resonator.
    pub kappa_hz: f64,
    /// Internal loss part of `kappa_hz`.
    pub kappa_l_hz: f64,
    /// Dispersive shift.
    pub chi_hz: f64,
    /// Coherent drive rate.
    pub epsilon_hz: f64,
    /// Input resonator frequency.
    pub omega0_hz: f64,
}

impl Default for DispersiveParams {
    fn default() -> Self {
        Self::paper2024()
    }
}

impl DispersiveParams {
    /// Values fitted to the Stark-shift and dephasing curves of the
    /// calibration run.
    pub fn paper2024() -> Self {
        Self {
            kappa_hz: 0.523e6,
            kappa_l_hz: 0.0,
            chi_hz: 3.461e6,
            epsilon_hz: 40.9e3,
            omega0_hz: 7.3696e9,
        }
    }

    /// Circuit-table variant with the nominal chi_qb = 3.4 MHz.
    pub fn circuit_table() -> Self {
        Self {
            chi_hz: 3.4e6,
            ..Self::paper2024()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_hz > 0.0 && self.kappa_hz.is_finite()) {
            return Err(Error::config("kappa_hz", "must be positive"));
        }
        if !(self.kappa_l_hz >= 0.0 && self.kappa_l_hz < self.kappa_hz) {
            return Err(Error::config("kappa_l_hz", "must satisfy 0 <= kappa_l < kappa"));
        }
        if !(self.chi_hz != 0.0 && self.chi_hz.is_finite()) {
            return Err(Error::config("chi_hz", "must be non-zero"));
        }
        if !self.epsilon_hz.is_finite() {
            return Err(Error::config("epsilon_hz", "must be finite"));
        }
        if !(self.omega0_hz > 0.0) {
            return Err(Error::config("omega0_hz", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkDephasing {
    pub delta_omega_hz: f64,
    pub delta_gamma_hz: f64,
}

/// Coherent amplitudes of the input resonator with the qubit in ground and
/// excited state, `alpha_{g/e} = eps / (kappa/2 + i (Delta -/+ chi/2))`.
pub fn coherent_amplitudes(delta_hz: f64, p: &DispersiveParams) -> (Complex64, Complex64) {
    let eps = Complex64::new(p.epsilon_hz, 0.0);
    let g = eps / Complex64::new(p.kappa_hz / 2.0, delta_hz - p.chi_hz / 2.0);
    let e = eps / Complex64::new(p.kappa_hz / 2.0, delta_hz + p.chi_hz / 2.0);
    (g, e)
}

fn closed_form(delta_hz: f64, kappa: f64, chi: f64, eps: f64) -> Complex64 {
    let k = Complex64::new(kappa, chi);
    -4.0 * chi * eps * eps / (k * k + 4.0 * delta_hz * delta_hz)
}

/// Frequency shift and dephasing, `dw + i dg = -4 chi |eps|^2 / ((kappa + i chi)^2 + 4 Delta^2)`.
///
/// The same quantity equals `-chi conj(alpha_g) alpha_e`; debug builds
/// assert the two agree.
pub fn stark_dephasing_model(delta_hz: f64, p: &DispersiveParams) -> StarkDephasing {
    let z = closed_form(delta_hz, p.kappa_hz, p.chi_hz, p.epsilon_hz);
    debug_assert!({
        let (g, e) = coherent_amplitudes(delta_hz, p);
        let alt = -p.chi_hz * g.conj() * e;
        (alt - z).norm() <= 1e-9 * z.norm().max(f64::MIN_POSITIVE) + 1e-300
    });
    StarkDephasing {
        delta_omega_hz: z.re,
        delta_gamma_hz: z.im,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyObservation {
    pub delta_hz: f64,
    pub delta_omega_hz: f64,
    pub delta_gamma_hz: f64,
    pub sigma_omega_hz: f64,
    pub sigma_gamma_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersiveFit {
    pub params: DispersiveParams,
    pub sigma_kappa_hz: f64,
    pub sigma_chi_hz: f64,
    pub sigma_epsilon_hz: f64,
    /// Covariance of (kappa, chi, epsilon) [Hz^2].
    pub covariance: [[f64; 3]; 3],
    pub chi2: f64,
    pub dof: usize,
}

/// Starting values read off the dephasing peaks: their separation gives chi,
/// their width kappa and their height `2 eps^2 / kappa`.
fn initial_guess(obs: &[RamseyObservation]) -> (f64, f64, f64) {
    let peak = obs
        .iter()
        .max_by(|a, b| a.delta_gamma_hz.total_cmp(&b.delta_gamma_hz))
        .expect("non-empty");
    let height = peak.delta_gamma_hz.max(f64::MIN_POSITIVE);
    let mut chi = 2.0 * peak.delta_hz.abs();
    let near_zero = obs
        .iter()
        .min_by(|a, b| a.delta_hz.abs().total_cmp(&b.delta_hz.abs()))
        .expect("non-empty");
    if near_zero.delta_omega_hz < 0.0 {
        chi = -chi;
    }
    let side: Vec<&RamseyObservation> = obs
        .iter()
        .filter(|o| o.delta_hz.signum() == peak.delta_hz.signum() && o.delta_gamma_hz >= 0.5 * height)
        .collect();
    let lo = side.iter().map(|o| o.delta_hz).fold(f64::INFINITY, f64::min);
    let hi = side.iter().map(|o| o.delta_hz).fold(f64::NEG_INFINITY, f64::max);
    let spacing = {
        let mut d: Vec<f64> = obs.iter().map(|o| o.delta_hz).collect();
        d.sort_by(f64::total_cmp);
        d.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    };
    let kappa = (hi - lo).max(spacing).max(1e-3 * chi.abs());
    let eps = (height * kappa / 2.0).sqrt();
    (kappa, chi, eps)
}

/// Joint weighted fit of the shift and dephasing curves for (kappa, chi, eps).
/// `kappa_l_hz` and `omega0_hz` are carried through from `template`.
pub fn fit_dispersive(obs: &[RamseyObservation], template: &DispersiveParams) -> Result<DispersiveFit> {
    if obs.len() < 8 {
        return Err(Error::InsufficientData(format!("{} detunings, need 8", obs.len())));
    }
    if obs.iter().any(|o| !(o.sigma_omega_hz > 0.0 && o.sigma_gamma_hz > 0.0)) {
        return Err(Error::domain("observation uncertainties must be positive"));
    }
    if !(obs.iter().any(|o| o.delta_hz < 0.0) && obs.iter().any(|o| o.delta_hz > 0.0)) {
        return Err(Error::InsufficientData("detunings do not span the resonance".into()));
    }
    let (k0, c0, e0) = initial_guess(obs);
    let n = 2 * obs.len();
    let residuals = |p: &[f64], r: &mut [f64]| {
        for (i, o) in obs.iter().enumerate() {
            let z = closed_form(o.delta_hz, p[0], p[1], p[2]);
            r[2 * i] = (o.delta_omega_hz - z.re) / o.sigma_omega_hz;
            r[2 * i + 1] = (o.delta_gamma_hz - z.im) / o.sigma_gamma_hz;
        }
    };
    let opts = LmOptions::default();
    let mut best: Option<crate::lm::LmFit> = None;
    let mut last_err = None;
    for f in [1.0, 0.5, 2.0, 0.25, 4.0] {
        let p0 = [k0 * f, c0, e0 * f.sqrt()];
        match levenberg_marquardt(residuals, &p0, &[k0, c0.abs(), e0], n, &opts) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.chi2 < b.chi2) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let fit = match best {
        Some(f) => f,
        None => return Err(last_err.expect("at least one attempt")),
    };
    let (kappa, chi, eps) = (fit.params[0].abs(), fit.params[1], fit.params[2].abs());
    if kappa <= template.kappa_l_hz {
        return Err(Error::ParameterAtBound("kappa"));
    }
    if eps == 0.0 {
        return Err(Error::ParameterAtBound("epsilon"));
    }
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = fit.covariance[(i, j)];
        }
    }
    // Absolute values flip signs of the matching covariance rows.
    let signs = [fit.params[0].signum(), 1.0, fit.params[2].signum()];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c *= signs[i] * signs[j];
        }
    }
    Ok(DispersiveFit {
        params: DispersiveParams {
            kappa_hz: kappa,
            chi_hz: chi,
            epsilon_hz: eps,
            ..*template
        },
        sigma_kappa_hz: fit.sigma(0),
        sigma_chi_hz: fit.sigma(1),
        sigma_epsilon_hz: fit.sigma(2),
        covariance,
        chi2: fit.chi2,
        dof: fit.dof,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonFlux {
    pub flux_per_s: f64,
    pub power_w: f64,
}

/// Photon flux reaching the input, `P_in / (h nu0) = kappa |eps|^2 / (kappa - kappa_l)^2`
/// with angular rates.
pub fn input_photon_flux(p: &DispersiveParams) -> Result<PhotonFlux> {
    if !(p.kappa_hz > p.kappa_l_hz && p.kappa_l_hz >= 0.0) {
        return Err(Error::domain("flux needs kappa > kappa_l >= 0"));
    }
    let flux = 2.0 * PI * p.kappa_hz * p.epsilon_hz.powi(2) / (p.kappa_hz - p.kappa_l_hz).powi(2);
    Ok(PhotonFlux {
        flux_per_s: flux,
        power_w: flux * photon_energy(p.omega0_hz),
    })
}

/// A value with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Flux with the uncertainty propagated from the (kappa, eps) covariance of
/// a fit.
pub fn input_photon_flux_with_error(fit: &DispersiveFit) -> Result<Measured> {
    let p = &fit.params;
    let flux = input_photon_flux(p)?.flux_per_s;
    let d = p.kappa_hz - p.kappa_l_hz;
    let d_kappa = 2.0 * PI * p.epsilon_hz.powi(2) * (-p.kappa_hz - p.kappa_l_hz) / d.powi(3);
    let d_eps = 2.0 * flux / p.epsilon_hz;
    let c = &fit.covariance;
    let var = d_kappa * d_kappa * c[0][0] + 2.0 * d_kappa * d_eps * c[0][2] + d_eps * d_eps * c[2][2];
    Ok(Measured::new(flux, var.max(0.0).sqrt()))
}

/// `eta = (rate_on - rate_off) / flux`, errors added in quadrature.
pub fn operational_efficiency(rate_on: Measured, rate_off: Measured, flux: Measured) -> Result<Measured> {
    if !(flux.value > 0.0) {
        return Err(Error::domain("flux must be positive"));
    }
    if rate_on.value < rate_off.value {
        return Err(Error::domain(format!(
            "ON rate {} below OFF rate {}",
            rate_on.value, rate_off.value
        )));
    }
    let excess = rate_on.value - rate_off.value;
    let eta = excess / flux.value;
    let var_excess = rate_on.sigma.powi(2) + rate_off.sigma.powi(2);
    let sigma = (var_excess / flux.value.powi(2) + (eta * flux.sigma / flux.value).powi(2)).sqrt();
    Ok(Measured::new(eta, sigma))
}

/// Observations of the model on a detuning grid, with Gaussian noise of the
/// given size when `rng` is supplied.
pub fn synthesize_observations<R: rand::Rng>(
    p: &DispersiveParams,
    detunings_hz: &[f64],
    sigma_hz: f64,
    rng: Option<&mut R>,
) -> Vec<RamseyObservation> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rng;
    detunings_hz
        .iter()
        .map(|&d| {
            let m = stark_dephasing_model(d, p);
            let (nw, ng) = match rng.as_deref_mut() {
                Some(r) => {
                    let a: f64 = StandardNormal.sample(r);
                    let b: f64 = StandardNormal.sample(r);
                    (a * sigma_hz, b * sigma_hz)
                }
                None => (0.0, 0.0),
            };
            RamseyObservation {
                delta_hz: d,
                delta_omega_hz: m.delta_omega_hz + nw,
                delta_gamma_hz: m.delta_gamma_hz + ng,
                sigma_omega_hz: sigma_hz,
                sigma_gamma_hz: sigma_hz,
            }
        })
        .collect()
}
