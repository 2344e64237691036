use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::CavityMode;
use crate::error::{Error, Result};

/// Carrier detuning plus a piecewise-constant envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseDrive {
    /// Carrier minus cavity frequency [Hz].
    pub detuning_hz: f64,
    /// `(start time, amplitude)` pairs, sorted by start. The amplitude holds
    /// until the next start; before the first start it is zero.
    pub envelope: Vec<(f64, f64)>,
    /// The drive is zero from `duration` on.
    pub duration: f64,
}

impl PulseDrive {
    /// A square pulse of amplitude `amplitude` from `t_on` to `t_off`.
    pub fn square(detuning_hz: f64, amplitude: f64, t_on: f64, t_off: f64) -> Self {
        Self {
            detuning_hz,
            envelope: vec![(t_on, amplitude)],
            duration: t_off,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.duration.is_finite() {
            return Err(Error::config("duration", "must be finite"));
        }
        let mut last = f64::NEG_INFINITY;
        for &(t, a) in &self.envelope {
            if !(a >= 0.0) {
                return Err(Error::config("envelope", "amplitudes must be non-negative"));
            }
            if t < last {
                return Err(Error::config("envelope", "segment starts must be sorted"));
            }
            last = t;
        }
        Ok(())
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        if t >= self.duration {
            return 0.0;
        }
        self.envelope
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(0.0, |(_, a)| *a)
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.envelope
            .iter()
            .map(|(t, _)| *t)
            .chain(std::iter::once(self.duration))
    }
}

/// Largest step the fixed-step integrator accepts for this mode and drive.
pub fn max_stable_step(mode: &CavityMode, drive: &PulseDrive) -> f64 {
    let scale = mode.kappa_total().max(drive.detuning_hz.abs());
    1.0 / (20.0 * scale)
}

/// Output power |out(t)|^2 on `t_grid` [photons / s], starting from an empty
/// cavity at t = 0. Uses a tenth of the largest accepted step, which keeps the
/// RK4 error near 1e-10 relative.
pub fn pulse_response(mode: &CavityMode, drive: &PulseDrive, t_grid: &[f64]) -> Result<Vec<f64>> {
    pulse_response_with_step(mode, drive, t_grid, 0.1 * max_stable_step(mode, drive))
}

/// As [`pulse_response`] with an explicit RK4 step, refused when it exceeds
/// `1 / (20 max(kappa_tot, |Delta|))`.
pub fn pulse_response_with_step(
    mode: &CavityMode,
    drive: &PulseDrive,
    t_grid: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    mode.validate()?;
    drive.validate()?;
    let limit = max_stable_step(mode, drive);
    if !(step > 0.0) || step > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { step, limit });
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::domain("time grid must be sorted and non-negative"));
    }

    let lambda = Complex64::new(-PI * mode.kappa_total(), 2.0 * PI * drive.detuning_hz);
    let coupling = (2.0 * PI * mode.kappa_ext_hz).sqrt();
    let rhs = |a: Complex64, s: f64| lambda * a + coupling * s;

    let mut breaks: Vec<f64> = drive.breakpoints().filter(|t| *t > 0.0).collect();
    breaks.sort_by(f64::total_cmp);
    let mut next_break = 0;

    let mut a = Complex64::new(0.0, 0.0);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        while t < target {
            while next_break < breaks.len() && breaks[next_break] <= t {
                next_break += 1;
            }
            let stop = match breaks.get(next_break) {
                Some(&b) if b < target => b,
                _ => target,
            };
            let span = stop - t;
            let n = (span / step).ceil().max(1.0) as usize;
            let h = span / n as f64;
            let s = drive.amplitude(0.5 * (t + stop));
            for _ in 0..n {
                let k1 = rhs(a, s);
                let k2 = rhs(a + k1 * (0.5 * h), s);
                let k3 = rhs(a + k2 * (0.5 * h), s);
                let k4 = rhs(a + k3 * h, s);
                a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            t = stop;
        }
        let s = drive.amplitude(target);
        out.push((Complex64::new(s, 0.0) - coupling * a).norm_sqr());
    }
    Ok(out)
}
