use serde::{Deserialize, Serialize};

use super::CountWindow;
use crate::error::{Error, Result};
use crate::special::two_sided_z;

/// Confidence level together with the significance threshold that defines it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceLevel {
    pub cl: f64,
    pub z: f64,
}

impl ConfidenceLevel {
    /// 95% quoted as a 2 sigma threshold.
    pub const NINETY_FIVE: Self = Self { cl: 0.95, z: 2.0 };

    /// Threshold from the two-sided Gaussian quantile of `cl`.
    pub fn two_sided(cl: f64) -> Result<Self> {
        if !(cl > 0.0 && cl < 1.0) {
            return Err(Error::domain("confidence level must lie in (0, 1)"));
        }
        Ok(Self { cl, z: two_sided_z(cl) })
    }
}

impl Default for ConfidenceLevel {
    fn default() -> Self {
        Self::NINETY_FIVE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// Standard deviations, non-negative.
    pub s: f64,
    pub n_c_star: f64,
    pub n_b_star: f64,
    pub k_b: f64,
}

fn check_counts(n_c: f64, n_b: f64, k_b: f64) -> Result<()> {
    if !(n_c > 0.0 && n_b > 0.0) || !n_c.is_finite() || !n_b.is_finite() {
        return Err(Error::domain(format!(
            "significance needs positive counts, got N_c = {n_c}, N_b = {n_b}"
        )));
    }
    if !(k_b > -1.0) {
        return Err(Error::domain("bias must exceed -1"));
    }
    if n_c < 100.0 && n_b < 100.0 {
        log::warn!("N_c = {n_c}, N_b = {n_b}: below the large-sample regime of the test");
    }
    Ok(())
}

/// Twice the log-likelihood ratio between a free cavity rate and a cavity
/// rate tied to `(1 + k_b)` times the background.
///
/// Written with `d = N_c - (1 + k_b) N_b` and `ln_1p` so the balanced case is
/// exactly zero.
fn likelihood_ratio(n_c: f64, n_b: f64, k_b: f64) -> f64 {
    let total = n_c + n_b;
    let d = n_c - (1.0 + k_b) * n_b;
    let lr = n_b * (-d / total).ln_1p() + n_c * (d / ((1.0 + k_b) * total)).ln_1p();
    (2.0 * lr).max(0.0)
}

/// Significance of `N_c` cavity counts over `N_b` background counts with
/// bias `k_b`:
///
/// ```text
/// S = sqrt(2 [N_b ln((2+k) N_b / (N_b+N_c)) + N_c ln((2+k) N_c / ((1+k)(N_b+N_c)))])
/// ```
pub fn significance(n_c: f64, n_b: f64, k_b: f64) -> Result<SignificanceResult> {
    check_counts(n_c, n_b, k_b)?;
    Ok(SignificanceResult {
        s: likelihood_ratio(n_c, n_b, k_b).sqrt(),
        n_c_star: n_c,
        n_b_star: n_b,
        k_b,
    })
}

/// Significance carrying the sign of the excess `N_c - (1 + k_b) N_b`.
pub fn signed_significance(n_c: f64, n_b: f64, k_b: f64) -> Result<f64> {
    let s = significance(n_c, n_b, k_b)?.s;
    Ok(if n_c < (1.0 + k_b) * n_b { -s } else { s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperLimit {
    /// Smallest integer count reaching the threshold; the binding value.
    pub n95_star: u64,
    /// The continuous root of `S = z`.
    pub n95_continuous: f64,
}

/// Smallest `N_c >= (1 + k_b) N_b` with `S(N_c, N_b, k_b) >= z`.
pub fn upper_limit_counts(n_b: f64, k_b: f64, cl: ConfidenceLevel) -> Result<UpperLimit> {
    if !(n_b > 0.0) {
        return Err(Error::domain("upper limit needs N_b > 0"));
    }
    if !(k_b > -1.0) {
        return Err(Error::domain("bias must exceed -1"));
    }
    let floor = (1.0 + k_b) * n_b;
    let s_at = |n: f64| likelihood_ratio(n, n_b, k_b).sqrt();
    let mut lo = floor;
    let mut hi = floor + cl.z * (floor.max(1.0)).sqrt() + 1.0;
    while s_at(hi) < cl.z {
        lo = hi;
        hi = floor + 2.0 * (hi - floor);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s_at(mid) < cl.z {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let mut n = hi.ceil().max(floor.ceil());
    while n > floor.ceil() && s_at(n - 1.0) >= cl.z {
        n -= 1.0;
    }
    while s_at(n) < cl.z {
        n += 1.0;
    }
    Ok(UpperLimit {
        n95_star: n as u64,
        n95_continuous: hi,
    })
}

/// Upper limit on signal counts `s` in the cavity channel given observed
/// `N_c`, `N_b`: the smallest `s >= 0` at which the data fall `z` below the
/// bias-plus-signal expectation, i.e. the signed significance at bias
/// `k_b + s / N_b` reaches `-z`.
pub fn signal_upper_limit(n_c: f64, n_b: f64, k_b: f64, cl: ConfidenceLevel) -> Result<f64> {
    check_counts(n_c, n_b, k_b)?;
    let at = |s: f64| -> f64 {
        let k = k_b + s / n_b;
        let lr = likelihood_ratio(n_c, n_b, k).sqrt();
        if n_c < (1.0 + k) * n_b {
            -lr
        } else {
            lr
        }
    };
    if at(0.0) <= -cl.z {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = (n_c - (1.0 + k_b) * n_b).max(0.0) + cl.z * (n_c + n_b).sqrt() + 1.0;
    while at(hi) > -cl.z {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) > -cl.z {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub k_b: f64,
    pub sigma: f64,
    pub n_c: u64,
    pub n_b: u64,
}

/// Pooled `sum N_c / sum N_b - 1` with its Poisson error.
pub fn estimate_bias(windows: &[CountWindow]) -> Result<BiasEstimate> {
    if windows.is_empty() {
        return Err(Error::Empty("no count windows".into()));
    }
    let n_c: u64 = windows.iter().map(|w| w.n_c).sum();
    let n_b: u64 = windows.iter().map(|w| w.n_b).sum();
    if n_b == 0 {
        return Err(Error::domain("no sideband counts to estimate the bias"));
    }
    let live_c: f64 = windows.iter().map(|w| w.live_c_s).sum();
    let live_b: f64 = windows.iter().map(|w| w.live_b_s).sum();
    let ratio = (n_c as f64 / live_c) / (n_b as f64 / live_b);
    let rel = if n_c > 0 {
        (1.0 / n_c as f64 + 1.0 / n_b as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(BiasEstimate {
        k_b: ratio - 1.0,
        sigma: ratio * rel,
        n_c,
        n_b,
    })
}
