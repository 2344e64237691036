use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::thermal_occupation;

/// Duration of each step of one detection cycle [s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleTimings {
    pub pump_s: f64,
    pub readout_s: f64,
    pub latency_s: f64,
    /// Extra wait after a ground-state readout.
    pub wait_s: f64,
    /// Reset pulse after an excited-state readout.
    pub pi_pulse_s: f64,
}

impl Default for CycleTimings {
    fn default() -> Self {
        Self {
            pump_s: 10.5e-6,
            readout_s: 0.8e-6,
            latency_s: 0.7e-6,
            wait_s: 0.3e-6,
            pi_pulse_s: 0.2e-6,
        }
    }
}

impl CycleTimings {
    /// A cycle that ends with the qubit read in its ground state.
    pub fn ground_cycle_s(&self) -> f64 {
        self.pump_s + self.readout_s + self.latency_s + self.wait_s
    }

    /// One reset attempt after an excited readout.
    pub fn reset_attempt_s(&self) -> f64 {
        self.pi_pulse_s + self.readout_s + self.latency_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutFidelity {
    /// Probability of reading "excited" for an excited qubit.
    pub p1_given_e: f64,
    /// Thermal excited-state population at the start of a cycle.
    pub p_thermal: f64,
    /// Probability of reading "excited" for a ground-state qubit.
    pub p_misread_ground: f64,
}

impl Default for ReadoutFidelity {
    fn default() -> Self {
        Self {
            p1_given_e: 0.93,
            p_thermal: 2e-4,
            p_misread_ground: 5e-5,
        }
    }
}

/// Bounded mean-reverting efficiency fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyDrift {
    /// Bound on |eta - eta0| / eta0.
    pub amplitude: f64,
    pub correlation_min: f64,
}

impl Default for EfficiencyDrift {
    fn default() -> Self {
        Self {
            amplitude: 0.10,
            correlation_min: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmpdParams {
    /// Buffer resonator linewidth [Hz].
    pub buffer_kappa_hz: f64,
    pub eta0: f64,
    pub eta_drift: EfficiencyDrift,
    /// Intrinsic (non-thermal) dark count rate [1/s].
    pub gamma_int_per_s: f64,
    /// Thermal occupancy of the input line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    /// Line temperature; when set it takes precedence over `n_th`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_temperature_k: Option<f64>,
    /// Detector bandwidth seen by thermal photons [Hz].
    pub detector_bandwidth_hz: f64,
    /// Common-mode rate random walk, diffusion coefficient [(1/s)^2 / s].
    pub rate_walk_diffusion: f64,
    /// Grid on which drift and walk are sampled and interpolated [s].
    pub noise_grid_s: f64,
    pub cycle: CycleTimings,
    /// Measured mean cycle duration; the timing floor is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_mean_cycle_s: Option<f64>,
    pub readout: ReadoutFidelity,
    /// Calibrated tone at the buffer during signal-ON blocks [photons/s].
    pub tone_flux_per_s: f64,
}

impl Default for SmpdParams {
    fn default() -> Self {
        Self::paper2024()
    }
}

impl SmpdParams {
    /// Operating point of the 2024 run: sideband windows near 650 clicks per
    /// 7.15 s and eta = 0.46.
    pub fn paper2024() -> Self {
        Self {
            buffer_kappa_hz: 0.7e6,
            eta0: 0.46,
            eta_drift: EfficiencyDrift::default(),
            gamma_int_per_s: 11.0,
            n_th: Some(1.0e-3),
            line_temperature_k: None,
            detector_bandwidth_hz: 175e3,
            rate_walk_diffusion: 2.4e-3,
            noise_grid_s: 1.0,
            cycle: CycleTimings::default(),
            measured_mean_cycle_s: Some(12.383e-6),
            readout: ReadoutFidelity::default(),
            tone_flux_per_s: 20050.0,
        }
    }

    /// Same detector without efficiency drift or rate wander.
    pub fn stationary(mut self) -> Self {
        self.eta_drift.amplitude = 0.0;
        self.rate_walk_diffusion = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::config(name, format!("{p} is not a probability")))
            }
        };
        prob("eta0", self.eta0)?;
        prob("readout.p1_given_e", self.readout.p1_given_e)?;
        prob("readout.p_thermal", self.readout.p_thermal)?;
        prob("readout.p_misread_ground", self.readout.p_misread_ground)?;
        if !(0.0..1.0).contains(&self.eta_drift.amplitude) {
            return Err(Error::config("eta_drift.amplitude", "must lie in [0, 1)"));
        }
        if !(self.eta_drift.correlation_min > 0.0) {
            return Err(Error::config("eta_drift.correlation_min", "must be positive"));
        }
        for (name, v) in [
            ("buffer_kappa_hz", self.buffer_kappa_hz),
            ("detector_bandwidth_hz", self.detector_bandwidth_hz),
            ("noise_grid_s", self.noise_grid_s),
            ("cycle.pump_s", self.cycle.pump_s),
            ("cycle.readout_s", self.cycle.readout_s),
            ("cycle.latency_s", self.cycle.latency_s),
            ("cycle.wait_s", self.cycle.wait_s),
            ("cycle.pi_pulse_s", self.cycle.pi_pulse_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("gamma_int_per_s", self.gamma_int_per_s),
            ("rate_walk_diffusion", self.rate_walk_diffusion),
            ("tone_flux_per_s", self.tone_flux_per_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be non-negative"));
            }
        }
        match (self.n_th, self.line_temperature_k) {
            (_, Some(t)) if !(t > 0.0) => {
                return Err(Error::config("line_temperature_k", "must be positive"))
            }
            (Some(n), None) if !(n >= 0.0) => return Err(Error::config("n_th", "must be non-negative")),
            (None, None) => {
                return Err(Error::config("n_th", "set n_th or line_temperature_k"))
            }
            _ => {}
        }
        let mean = self.mean_cycle_s();
        if !(12e-6..=18e-6).contains(&mean) {
            return Err(Error::config(
                "measured_mean_cycle_s",
                format!("mean cycle {:.3} us outside [12, 18] us", mean * 1e6),
            ));
        }
        Ok(())
    }

    /// Thermal occupancy at frequency `nu` [Hz].
    pub fn thermal_occupancy(&self, nu: f64) -> f64 {
        match (self.n_th, self.line_temperature_k) {
            (_, Some(t)) => thermal_occupation(nu, t).unwrap_or(0.0),
            (Some(n), None) => n,
            (None, None) => 0.0,
        }
    }

    /// Mean detection-cycle duration [s].
    pub fn mean_cycle_s(&self) -> f64 {
        self.measured_mean_cycle_s
            .unwrap_or_else(|| self.cycle.ground_cycle_s())
    }

    /// Mean cycle rounded to whole nanoseconds, the schedule's time unit.
    pub fn mean_cycle_ns(&self) -> u64 {
        (self.mean_cycle_s() * 1e9).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthParams {
    /// Signal photon rate leaving the cavity on resonance [1/s].
    pub signal_rate_per_s: f64,
    /// Fixed signal frequency; when absent the signal follows the cavity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_nu_hz: Option<f64>,
    /// Loaded cavity linewidth filtering a fixed-frequency signal [Hz].
    pub cavity_linewidth_hz: f64,
    /// Excess of on-resonance thermal background over the sidebands.
    pub k_b_true: f64,
    pub seed: u64,
}

impl Default for TruthParams {
    fn default() -> Self {
        Self::background_only(0)
    }
}

impl TruthParams {
    pub fn background_only(seed: u64) -> Self {
        Self {
            signal_rate_per_s: 0.0,
            signal_nu_hz: None,
            cavity_linewidth_hz: 7.3696e9 / 2.25e5,
            k_b_true: 0.04,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_rate_per_s >= 0.0) {
            return Err(Error::config("signal_rate_per_s", "must be non-negative"));
        }
        if !(self.k_b_true >= -1.0) {
            return Err(Error::config("k_b_true", "must be at least -1"));
        }
        if !(self.cavity_linewidth_hz > 0.0) {
            return Err(Error::config("cavity_linewidth_hz", "must be positive"));
        }
        Ok(())
    }
}
