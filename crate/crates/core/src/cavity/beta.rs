use serde::{Deserialize, Serialize};

use super::{pulse_response, CavityMode, PulseDrive};
use crate::error::{Error, Result};

/// A measured time trace of the reflected power under a known drive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseTrace {
    pub drive: PulseDrive,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaResolution {
    Overcoupled,
    Undercoupled,
    /// Neither candidate is preferred by a chi2 ratio of at least 2.
    Ambiguous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaOutcome {
    pub resolution: BetaResolution,
    /// Coupling of the preferred candidate (the overcoupled one if ambiguous).
    pub beta: f64,
    pub chi2_over: f64,
    pub chi2_under: f64,
    /// Worse chi2 over better chi2.
    pub chi2_ratio: f64,
}

/// Chi2 ratio above which the better-fitting candidate is accepted.
pub const DECISIVE_CHI2_RATIO: f64 = 2.0;

/// Residual chi2 after a linear fit of gain and offset to `model`.
fn linear_chi2(model: &[f64], trace: &ResponseTrace) -> f64 {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((m, y), sig) in model.iter().zip(&trace.values).zip(&trace.sigmas) {
        let w = 1.0 / (sig * sig);
        s += w;
        sx += w * m;
        sy += w * y;
        sxx += w * m * m;
        sxy += w * m * y;
    }
    let det = s * sxx - sx * sx;
    let (gain, offset) = if det.abs() > 1e-12 * s * sxx {
        ((s * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    } else {
        (0.0, sy / s)
    };
    model
        .iter()
        .zip(&trace.values)
        .zip(&trace.sigmas)
        .map(|((m, y), sig)| {
            let r = (y - gain * m - offset) / sig;
            r * r
        })
        .sum()
}

/// Picks between the over- and undercoupled readings of a dip by comparing
/// their predicted transients to a measured trace.
pub fn disambiguate_beta(trace: &ResponseTrace, candidates: (CavityMode, CavityMode)) -> Result<BetaOutcome> {
    let n = trace.times.len();
    if n < 3 || trace.values.len() != n || trace.sigmas.len() != n {
        return Err(Error::InsufficientData(
            "trace needs at least 3 points with matching values and sigmas".into(),
        ));
    }
    if trace.sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::domain("sigmas must be positive"));
    }
    let (mut over, mut under) = candidates;
    if over.beta() < under.beta() {
        std::mem::swap(&mut over, &mut under);
    }
    let m_over = pulse_response(&over, &trace.drive, &trace.times)?;
    let m_under = pulse_response(&under, &trace.drive, &trace.times)?;
    // Floor so that two perfect fits compare as equal rather than as 0/0.
    let floor = 1e-9 * n as f64;
    let chi2_over = linear_chi2(&m_over, trace);
    let chi2_under = linear_chi2(&m_under, trace);
    let (a, b) = (chi2_over + floor, chi2_under + floor);
    let ratio = a.max(b) / a.min(b);
    let (resolution, beta) = if ratio < DECISIVE_CHI2_RATIO {
        (BetaResolution::Ambiguous, over.beta())
    } else if a < b {
        (BetaResolution::Overcoupled, over.beta())
    } else {
        (BetaResolution::Undercoupled, under.beta())
    };
    Ok(BetaOutcome {
        resolution,
        beta,
        chi2_over,
        chi2_under,
        chi2_ratio: ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn synth(truth: &CavityMode, times: Vec<f64>, scale: f64, seed: u64) -> ResponseTrace {
        let drive = PulseDrive::square(0.0, 1.0, 10e-6, 90e-6);
        let clean = pulse_response(truth, &drive, &times).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = clean
            .iter()
            .map(|p| Poisson::new(scale * p + 5.0).unwrap().sample(&mut rng))
            .collect();
        let sigmas = values.iter().map(|v| v.max(1.0).sqrt()).collect();
        ResponseTrace {
            drive,
            times,
            values,
            sigmas,
        }
    }

    fn pair() -> (CavityMode, CavityMode) {
        let over = CavityMode::from_q0_beta(7.3694e9, 8.8135e5, 3.15).unwrap();
        (over, over.coupling_mirror())
    }

    #[test]
    fn transients_select_true_coupling() {
        let (over, under) = pair();
        let times: Vec<f64> = (0..140).map(|i| i as f64 * 1e-6).collect();
        let out = disambiguate_beta(&synth(&over, times.clone(), 2000.0, 1), (over, under)).unwrap();
        assert_eq!(out.resolution, BetaResolution::Overcoupled);
        assert!((out.beta - 3.15).abs() < 1e-9);
        let out = disambiguate_beta(&synth(&under, times, 2000.0, 2), (under, over)).unwrap();
        assert_eq!(out.resolution, BetaResolution::Undercoupled);
    }

    #[test]
    fn steady_state_only_is_ambiguous() {
        let (over, under) = pair();
        let times: Vec<f64> = (0..20).map(|i| 60e-6 + i as f64 * 1e-6).collect();
        let out = disambiguate_beta(&synth(&over, times, 2000.0, 3), (over, under)).unwrap();
        assert_eq!(out.resolution, BetaResolution::Ambiguous, "{out:?}");
    }

    #[test]
    fn mismatched_lengths() {
        let (over, under) = pair();
        let mut t = synth(&over, vec![1e-6, 2e-6, 3e-6], 10.0, 4);
        t.sigmas.pop();
        assert!(disambiguate_beta(&t, (over, under)).is_err());
    }
}
