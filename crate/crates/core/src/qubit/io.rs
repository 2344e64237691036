use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::{DispersiveFit, Measured, PhotonFlux, RamseyObservation};
use crate::error::{Error, Result};

const COLUMNS: &str = "delta_Hz,domega_Hz,dgamma_Hz,err_domega,err_dgamma";

pub fn write_observations<W: Write>(w: &mut W, obs: &[RamseyObservation]) -> Result<()> {
    writeln!(w, "{COLUMNS}")?;
    for o in obs {
        writeln!(
            w,
            "{},{},{},{},{}",
            o.delta_hz, o.delta_omega_hz, o.delta_gamma_hz, o.sigma_omega_hz, o.sigma_gamma_hz
        )?;
    }
    Ok(())
}

/// Reads an observation table; `#` lines are comments.
pub fn read_observations<R: BufRead>(r: &mut R) -> Result<Vec<RamseyObservation>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if !seen_header {
            if text != COLUMNS {
                return Err(Error::Format {
                    line: i + 1,
                    reason: format!("expected column header `{COLUMNS}`"),
                });
            }
            seen_header = true;
            continue;
        }
        let v: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if v.len() != 5 {
            return Err(Error::Format {
                line: i + 1,
                reason: format!("expected 5 fields, found {}", v.len()),
            });
        }
        if !(v[3] > 0.0 && v[4] > 0.0) {
            return Err(Error::Format {
                line: i + 1,
                reason: "uncertainties must be positive".into(),
            });
        }
        out.push(RamseyObservation {
            delta_hz: v[0],
            delta_omega_hz: v[1],
            delta_gamma_hz: v[2],
            sigma_omega_hz: v[3],
            sigma_gamma_hz: v[4],
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("observation table has no rows".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub fit: DispersiveFit,
    pub reduced_chi2: f64,
    pub flux: PhotonFlux,
    pub flux_sigma_per_s: f64,
    pub efficiency: Option<Measured>,
}

pub fn write_calibration_report<W: Write>(w: &mut W, report: &CalibrationReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, report).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{synthesize_observations, DispersiveParams};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip() {
        let p = DispersiveParams::paper2024();
        let obs = synthesize_observations::<ChaCha8Rng>(&p, &[-1e6, 0.5e6, 2e6], 40.0, None);
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs).unwrap();
        assert_eq!(read_observations(&mut buf.as_slice()).unwrap(), obs);
    }

    #[test]
    fn bad_rows() {
        let text = format!("{COLUMNS}\n1,2,3,4\n");
        assert!(matches!(read_observations(&mut text.as_bytes()), Err(Error::Format { line: 2, .. })));
        let text = format!("{COLUMNS}\n1,2,3,0,1\n");
        assert!(read_observations(&mut text.as_bytes()).is_err());
        let text = format!("{COLUMNS}\n");
        assert!(matches!(read_observations(&mut text.as_bytes()), Err(Error::Empty(_))));
    }
}
