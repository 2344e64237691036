use serde::{Deserialize, Serialize};

use super::stats::{signed_significance, upper_limit_counts, ConfidenceLevel};
use super::CountWindow;
use crate::constants::photon_energy;
use crate::error::{Error, Result};
use crate::physics::{axion_signal_power, coupling_conversions, AxionScale, DetectorFigures, HaloscopeConfig};

/// Emitted power equivalent to the excess `N95 - N_b` detected in `dt_m_s`:
/// `P95 = h nu (N95 - N_b) / (eta dt_m)` [W].
pub fn limit_power(n95: f64, n_b: f64, eta: f64, nu_c_hz: f64, dt_m_s: f64) -> Result<f64> {
    if !(dt_m_s > 0.0) {
        return Err(Error::domain("measurement interval must be positive"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain("efficiency must lie in (0, 1]"));
    }
    if n95 < n_b {
        return Err(Error::domain(format!("N95 = {n95} below N_b = {n_b}")));
    }
    Ok(photon_energy(nu_c_hz) * (n95 - n_b) / (eta * dt_m_s))
}

/// Coupling |g_agg| [1/GeV] at which the haloscope `cfg`, tuned to `nu_hz`,
/// would deliver `power_w`.
pub fn coupling_limit(cfg: &HaloscopeConfig, nu_hz: f64, power_w: f64) -> Result<f64> {
    if !(power_w >= 0.0) {
        return Err(Error::domain("power must be non-negative"));
    }
    let unit = HaloscopeConfig {
        g_gamma: 1.0,
        nu_c_hz: nu_hz,
        q_loaded: None,
        ..cfg.clone()
    };
    let p_unit = axion_signal_power(&unit)?;
    if !(p_unit > 0.0) {
        return Err(Error::domain("configuration produces no axion power"));
    }
    let scales = coupling_conversions(AxionScale::FrequencyHz(nu_hz))?;
    Ok((power_w / p_unit).sqrt() * scales.g_per_g_gamma)
}

/// A contiguous group of windows spanning one measurement interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubInterval {
    pub first_step: u64,
    pub n_windows: usize,
    pub start_s: f64,
    pub end_s: f64,
    /// Mean cavity frequency of the member windows [Hz].
    pub nu_c_hz: f64,
    pub n_c: u64,
    pub n_b: u64,
    /// True when the windows did not fill one interval.
    pub truncated: bool,
}

fn group(ws: &[CountWindow], truncated: bool) -> SubInterval {
    SubInterval {
        first_step: ws[0].step,
        n_windows: ws.len(),
        start_s: ws[0].start_s,
        end_s: ws[ws.len() - 1].end_s,
        nu_c_hz: ws.iter().map(|w| w.nu_c_hz).sum::<f64>() / ws.len() as f64,
        n_c: ws.iter().map(|w| w.n_c).sum(),
        n_b: ws.iter().map(|w| w.n_b).sum(),
        truncated,
    }
}

/// Splits time-ordered windows into groups of `round(dt_m / spacing)`
/// consecutive windows, where `spacing` is the mean start-to-start interval.
/// An incomplete trailing group is dropped unless it is the only one.
pub fn partition_subintervals(windows: &[CountWindow], dt_m_s: f64) -> Result<Vec<SubInterval>> {
    if !(dt_m_s > 0.0) {
        return Err(Error::domain("measurement interval must be positive"));
    }
    let ws: Vec<CountWindow> = windows.iter().filter(|w| w.start_s.is_finite()).copied().collect();
    if ws.is_empty() {
        return Err(Error::Empty("no count windows".into()));
    }
    let span = ws[ws.len() - 1].end_s - ws[0].start_s;
    if span < dt_m_s {
        log::warn!("windows span {span:.1} s, shorter than the {dt_m_s} s interval; using one truncated group");
        return Ok(vec![group(&ws, true)]);
    }
    let spacing = (ws[ws.len() - 1].start_s - ws[0].start_s) / (ws.len() - 1) as f64;
    let k = ((dt_m_s / spacing).round() as usize).max(1);
    let full: Vec<SubInterval> = ws.chunks_exact(k).map(|c| group(c, false)).collect();
    if full.is_empty() {
        log::warn!("{} windows do not fill one {dt_m_s} s interval", ws.len());
        return Ok(vec![group(&ws, true)]);
    }
    Ok(full)
}

/// The sub-interval with the fewest cavity counts; ties go to the earliest.
pub fn select_subinterval(windows: &[CountWindow], dt_m_s: f64) -> Result<SubInterval> {
    let groups = partition_subintervals(windows, dt_m_s)?;
    let mut best = groups[0];
    for g in &groups[1..] {
        if g.n_c < best.n_c {
            best = *g;
        }
    }
    Ok(best)
}

/// How the bias entering the limits is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasPolicy {
    Fixed(f64),
    /// Pooled estimate from the analysed windows.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitOptions {
    pub bias: BiasPolicy,
    pub dt_m_s: f64,
    pub cl: ConfidenceLevel,
    pub discovery_sigma: f64,
    /// Width of the frequency bins; the cavity linewidth when absent.
    pub bin_width_hz: Option<f64>,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            bias: BiasPolicy::Fixed(0.05),
            dt_m_s: 600.0,
            cl: ConfidenceLevel::NINETY_FIVE,
            discovery_sigma: 5.0,
            bin_width_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionPoint {
    pub nu_hz: f64,
    pub m_a_ev: f64,
    /// Index of the frequency bin.
    pub bin: usize,
    pub n_c_star: u64,
    pub n_b_star: u64,
    pub n95_star: u64,
    pub p95_w: f64,
    pub g_limit_gev_inv: f64,
    pub cl: f64,
    /// Signed significance of the counts pooled over the whole bin.
    pub significance: f64,
    pub discovery: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub points: Vec<ExclusionPoint>,
    pub k_b: f64,
    pub bin_width_hz: f64,
    pub dt_m_s: f64,
    /// Bin width per measurement interval [MHz/day].
    pub scan_speed_mhz_per_day: f64,
}

impl ExclusionReport {
    pub fn discoveries(&self) -> impl Iterator<Item = &ExclusionPoint> {
        self.points.iter().filter(|p| p.discovery)
    }
}

/// Per frequency bin: a discovery test on the pooled counts, then the
/// count limit of the quietest sub-interval turned into power and coupling.
pub fn exclusion_curve(
    windows: &[CountWindow],
    cfg: &HaloscopeConfig,
    det: &DetectorFigures,
    opts: &LimitOptions,
) -> Result<ExclusionReport> {
    cfg.validate()?;
    let ws: Vec<CountWindow> = windows.iter().filter(|w| w.start_s.is_finite()).copied().collect();
    if ws.is_empty() {
        return Err(Error::Empty("no frequency steps to analyse".into()));
    }
    let k_b = match opts.bias {
        BiasPolicy::Fixed(k) => k,
        BiasPolicy::Estimated => super::estimate_bias(&ws)?.k_b,
    };
    let width = opts.bin_width_hz.unwrap_or_else(|| cfg.cavity_linewidth());
    if !(width > 0.0) {
        return Err(Error::domain("bin width must be positive"));
    }
    let nu0 = ws.iter().map(|w| w.nu_c_hz).fold(f64::INFINITY, f64::min);
    let mut bins: Vec<Vec<CountWindow>> = Vec::new();
    for w in &ws {
        let i = ((w.nu_c_hz - nu0) / width).floor() as usize;
        if bins.len() <= i {
            bins.resize(i + 1, Vec::new());
        }
        bins[i].push(*w);
    }
    let mut points = Vec::new();
    for (bin, members) in bins.iter().enumerate().filter(|(_, m)| !m.is_empty()) {
        let n_c: u64 = members.iter().map(|w| w.n_c).sum();
        let n_b: u64 = members.iter().map(|w| w.n_b).sum();
        if n_b == 0 {
            return Err(Error::domain(format!("no background counts in bin {bin}")));
        }
        let significance = if n_c > 0 {
            signed_significance(n_c as f64, n_b as f64, k_b)?
        } else {
            f64::NEG_INFINITY
        };
        let sub = select_subinterval(members, opts.dt_m_s)?;
        if sub.n_b == 0 {
            return Err(Error::domain(format!("no background counts in the selected interval of bin {bin}")));
        }
        let ul = upper_limit_counts(sub.n_b as f64, k_b, opts.cl)?;
        let p95 = limit_power(ul.n95_star as f64, sub.n_b as f64, det.eta, sub.nu_c_hz, opts.dt_m_s)?;
        let g = coupling_limit(cfg, sub.nu_c_hz, p95)?;
        points.push(ExclusionPoint {
            nu_hz: sub.nu_c_hz,
            m_a_ev: coupling_conversions(AxionScale::FrequencyHz(sub.nu_c_hz))?.m_a_ev,
            bin,
            n_c_star: sub.n_c,
            n_b_star: sub.n_b,
            n95_star: ul.n95_star,
            p95_w: p95,
            g_limit_gev_inv: g,
            cl: opts.cl.cl,
            significance,
            discovery: significance >= opts.discovery_sigma,
        });
    }
    Ok(ExclusionReport {
        points,
        k_b,
        bin_width_hz: width,
        dt_m_s: opts.dt_m_s,
        scan_speed_mhz_per_day: width / opts.dt_m_s * 86_400.0 / 1e6,
    })
}
