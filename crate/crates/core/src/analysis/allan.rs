use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllanPoint {
    pub tau_s: f64,
    pub variance: f64,
    /// Number of aggregated bins behind the estimate.
    pub bins: usize,
}

/// Non-overlapping Allan variance of an evenly spaced series of window
/// averages: `sigma^2(tau) = 1/2 <(xbar_{i+1} - xbar_i)^2>`.
///
/// Each `tau` must be a whole multiple of `base_tau_s` and leave at least
/// three aggregated bins.
pub fn allan_variance(series: &[f64], base_tau_s: f64, taus: &[f64]) -> Result<Vec<AllanPoint>> {
    if !(base_tau_s > 0.0) {
        return Err(Error::domain("base window must be positive"));
    }
    taus.iter()
        .map(|&tau| {
            let m_f = tau / base_tau_s;
            let m = m_f.round();
            if m < 1.0 || (m_f - m).abs() > 1e-9 * m_f.max(1.0) {
                return Err(Error::domain(format!(
                    "tau {tau} s is not a multiple of the {base_tau_s} s window"
                )));
            }
            let m = m as usize;
            let bins: Vec<f64> = series
                .chunks_exact(m)
                .map(|c| c.iter().sum::<f64>() / m as f64)
                .collect();
            if bins.len() < 3 {
                return Err(Error::InsufficientData(format!(
                    "tau {tau} s leaves {} bins, need 3",
                    bins.len()
                )));
            }
            let sum: f64 = bins.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            Ok(AllanPoint {
                tau_s: tau,
                variance: 0.5 * sum / (bins.len() - 1) as f64,
                bins: bins.len(),
            })
        })
        .collect()
}

/// The largest multiples of `base_tau_s` up to `max_tau_s`, roughly evenly
/// spaced in log(tau).
pub fn log_spaced_taus(base_tau_s: f64, max_tau_s: f64, per_decade: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let n = ((max_tau_s / base_tau_s).log10() * per_decade as f64).floor() as i64;
    for i in 0..=n.max(0) {
        let m = 10f64.powf(i as f64 / per_decade as f64).round();
        let tau = m * base_tau_s;
        if tau <= max_tau_s * (1.0 + 1e-12) && out.last().is_none_or(|t| *t < tau) {
            out.push(tau);
        }
    }
    out
}

/// Least-squares slope of log(variance) against log(tau).
pub fn loglog_slope(points: &[AllanPoint]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.variance > 0.0)
        .map(|p| (p.tau_s.ln(), p.variance.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
