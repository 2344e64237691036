use serde::{Deserialize, Serialize};

use super::beta_pair_from_depth;
use crate::error::{Error, Result};
use crate::lm::{levenberg_marquardt, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyPoint {
    pub freq_hz: f64,
    /// Detected counts (or count rate) with Poisson statistics.
    pub counts: f64,
}

/// Result of fitting `A [1 - D / (1 + (2 (nu - nu_c) / kappa)^2)]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectroscopyFit {
    pub nu_c_hz: f64,
    pub nu_c_sigma_hz: f64,
    /// Loaded linewidth kappa / 2 pi [Hz].
    pub linewidth_hz: f64,
    pub linewidth_sigma_hz: f64,
    pub dip_depth: f64,
    pub dip_depth_sigma: f64,
    pub amplitude: f64,
    pub q_loaded: f64,
    pub q_loaded_sigma: f64,
    /// Over- and undercoupled readings of the same dip.
    pub beta_over: f64,
    pub beta_under: f64,
    pub q0_over: f64,
    pub q0_under: f64,
    pub q0_over_sigma: f64,
    pub q0_under_sigma: f64,
    pub chi2: f64,
    pub reduced_chi2: f64,
}

fn model(p: &[f64], nu_ref: f64, nu: f64) -> f64 {
    let x = 2.0 * (nu - nu_ref - p[1]) / p[2];
    p[0] * (1.0 - p[3] / (1.0 + x * x))
}

/// Lorentzian dip fit with Poisson weights.
///
/// Fails with `NoResonance` when the deepest point is not significantly below
/// the baseline and `InsufficientData` when the sweep cannot constrain the
/// linewidth.
pub fn fit_cavity_spectroscopy(points: &[SpectroscopyPoint]) -> Result<SpectroscopyFit> {
    if points.len() < 7 {
        return Err(Error::InsufficientData(format!(
            "{} spectroscopy points, need at least 7",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.freq_hz.is_finite() || !(p.counts >= 0.0)) {
        return Err(Error::domain("spectroscopy points must be finite and non-negative"));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
    let n = pts.len();
    let span = pts[n - 1].freq_hz - pts[0].freq_hz;
    let nu_ref = 0.5 * (pts[0].freq_hz + pts[n - 1].freq_hz);

    let mut sorted: Vec<f64> = pts.iter().map(|p| p.counts).collect();
    sorted.sort_by(f64::total_cmp);
    let top = (n / 5).max(2);
    let a0 = sorted[n - top..].iter().sum::<f64>() / top as f64;
    let (i_min, y_min) = pts
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.counts))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let d0 = 1.0 - y_min / a0;
    if !(a0 > 0.0) || d0 < (4.0 / a0.sqrt()).max(1e-9) {
        return Err(Error::NoResonance(format!(
            "deepest point {y_min:.4e} vs baseline {a0:.4e}"
        )));
    }
    let half = a0 * (1.0 - 0.5 * d0);
    let left = (0..i_min).rev().find(|&i| pts[i].counts >= half);
    let right = (i_min + 1..n).find(|&i| pts[i].counts >= half);
    let w0 = match (left, right) {
        (Some(l), Some(r)) => pts[r].freq_hz - pts[l].freq_hz,
        _ => {
            return Err(Error::InsufficientData(
                "sweep does not cover both flanks of the dip".into(),
            ))
        }
    };
    if span < 3.0 * w0 {
        return Err(Error::InsufficientData(format!(
            "sweep span {span:.3e} Hz under three linewidths ({w0:.3e} Hz)"
        )));
    }

    let sigmas: Vec<f64> = pts.iter().map(|p| p.counts.max(1.0).sqrt()).collect();
    let p0 = [a0, pts[i_min].freq_hz - nu_ref, w0, d0.min(1.0)];
    let scales = [a0, w0, w0, 1.0];
    let fit = levenberg_marquardt(
        |p, r| {
            for (i, pt) in pts.iter().enumerate() {
                r[i] = (pt.counts - model(p, nu_ref, pt.freq_hz)) / sigmas[i];
            }
        },
        &p0,
        &scales,
        n,
        &LmOptions::default(),
    )?;
    let p = &fit.params;
    let (amp, width, depth) = (p[0], p[2].abs(), p[3]);
    if !(width > 0.0) || !(depth > 0.0) {
        return Err(Error::NoResonance(format!("fitted depth {depth:.3e}, width {width:.3e}")));
    }
    if depth > 1.0 + 5.0 * fit.sigma(3) {
        return Err(Error::ParameterAtBound("dip_depth"));
    }
    let nu_c = nu_ref + p[1];
    let q_l = nu_c / width;

    // Linear propagation of (kappa, D) into Q0 = nu (1 + beta) / kappa.
    let q0_of = |w: f64, d: f64| {
        let (over, under) = beta_pair_from_depth(d.min(1.0));
        (nu_c * (1.0 + over) / w, nu_c * (1.0 + under) / w)
    };
    let (q0_over, q0_under) = q0_of(width, depth);
    let hw = 1e-6 * width;
    let hd = 1e-6 * depth.clamp(1e-6, 1.0 - 1e-6);
    let (ow_p, uw_p) = q0_of(width + hw, depth);
    let (ow_m, uw_m) = q0_of(width - hw, depth);
    let (od_p, ud_p) = q0_of(width, depth + hd);
    let (od_m, ud_m) = q0_of(width, depth - hd);
    let cov = |a: usize, b: usize| fit.covariance[(a, b)];
    let propagate = |gw: f64, gd: f64| {
        (gw * gw * cov(2, 2) + 2.0 * gw * gd * cov(2, 3) + gd * gd * cov(3, 3))
            .max(0.0)
            .sqrt()
    };
    let q0_over_sigma = propagate((ow_p - ow_m) / (2.0 * hw), (od_p - od_m) / (2.0 * hd));
    let q0_under_sigma = propagate((uw_p - uw_m) / (2.0 * hw), (ud_p - ud_m) / (2.0 * hd));
    let (beta_over, beta_under) = beta_pair_from_depth(depth.min(1.0));

    Ok(SpectroscopyFit {
        nu_c_hz: nu_c,
        nu_c_sigma_hz: fit.sigma(1),
        linewidth_hz: width,
        linewidth_sigma_hz: fit.sigma(2),
        dip_depth: depth,
        dip_depth_sigma: fit.sigma(3),
        amplitude: amp,
        q_loaded: q_l,
        q_loaded_sigma: q_l * fit.sigma(2) / width,
        beta_over,
        beta_under,
        q0_over,
        q0_under,
        q0_over_sigma,
        q0_under_sigma,
        chi2: fit.chi2,
        reduced_chi2: fit.reduced_chi2(),
    })
}
