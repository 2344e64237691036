use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::{AllanPoint, BiasEstimate, ExclusionPoint, ExclusionReport};
use crate::error::{Error, Result};
use crate::format::{provenance_from, read_header, write_header, Provenance};

const MAGIC: &str = "haloscope-exclusion v1";
const COLUMNS: &str = "nu_Hz,m_a_eV,N95,P95_W,g_limit_GeVinv,CL,N_c,N_b,S,discovery";

pub fn write_exclusion<W: Write>(w: &mut W, report: &ExclusionReport, provenance: &Provenance) -> Result<()> {
    write_header(
        w,
        MAGIC,
        &[
            ("digest", provenance.digest.clone()),
            ("seed", provenance.seed.to_string()),
            ("k_b", report.k_b.to_string()),
            ("dt_m_s", report.dt_m_s.to_string()),
            ("bin_width_hz", report.bin_width_hz.to_string()),
        ],
    )?;
    writeln!(w, "{COLUMNS}")?;
    for p in &report.points {
        writeln!(
            w,
            "{:.3},{:.6e},{},{:.6e},{:.6e},{},{},{},{:.4},{}",
            p.nu_hz,
            p.m_a_ev,
            p.n95_star,
            p.p95_w,
            p.g_limit_gev_inv,
            p.cl,
            p.n_c_star,
            p.n_b_star,
            p.significance,
            u8::from(p.discovery)
        )?;
    }
    Ok(())
}

fn field<T: std::str::FromStr>(s: Option<&str>, line: usize, name: &str) -> Result<T> {
    s.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Format {
        line,
        reason: format!("bad {name}"),
    })
}

/// Reads back the table rows; bin indices are assigned in row order.
pub fn read_exclusion<R: BufRead>(r: &mut R) -> Result<(Vec<ExclusionPoint>, Provenance)> {
    let (fields, first, mut line_no) = read_header(r, MAGIC)?;
    let provenance = provenance_from(&fields)?;
    if first.as_deref() != Some(COLUMNS) {
        return Err(Error::Format {
            line: line_no,
            reason: format!("expected column header `{COLUMNS}`"),
        });
    }
    let mut points = Vec::new();
    for line in r.lines() {
        let line = line?;
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let mut next = || it.next();
        points.push(ExclusionPoint {
            nu_hz: field(next(), line_no, "nu_Hz")?,
            m_a_ev: field(next(), line_no, "m_a_eV")?,
            n95_star: field(next(), line_no, "N95")?,
            p95_w: field(next(), line_no, "P95_W")?,
            g_limit_gev_inv: field(next(), line_no, "g_limit_GeVinv")?,
            cl: field(next(), line_no, "CL")?,
            n_c_star: field(next(), line_no, "N_c")?,
            n_b_star: field(next(), line_no, "N_b")?,
            significance: field(next(), line_no, "S")?,
            discovery: field::<u8>(next(), line_no, "discovery")? == 1,
            bin: points.len(),
        });
    }
    Ok((points, provenance))
}

/// Allan tables of the cavity, sideband and difference rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllanTables {
    pub cavity: Vec<AllanPoint>,
    pub sidebands: Vec<AllanPoint>,
    pub difference: Vec<AllanPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub digest: String,
    pub seed: u64,
    pub windows: usize,
    pub dark_clicks: u64,
    pub live_dark_s: f64,
    pub bias: BiasEstimate,
    pub k_b_used: f64,
    pub scan_speed_mhz_per_day: f64,
    pub discoveries: Vec<f64>,
    /// Detected fraction of the calibration tone during signal-ON blocks.
    pub on_rate_per_s: f64,
    pub allan: Option<AllanTables>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exclusion_roundtrip() {
        let p = ExclusionPoint {
            nu_hz: 7.3692e9,
            m_a_ev: 3.0477e-5,
            bin: 0,
            n_c_star: 18_000,
            n_b_star: 17_500,
            n95_star: 18_700,
            p95_w: 1.2e-23,
            g_limit_gev_inv: 7.1e-14,
            cl: 0.95,
            significance: -1.25,
            discovery: false,
        };
        let report = ExclusionReport {
            points: vec![p, ExclusionPoint { bin: 1, discovery: true, ..p }],
            k_b: 0.05,
            bin_width_hz: 32_754.0,
            dt_m_s: 600.0,
            scan_speed_mhz_per_day: 4.7,
        };
        let prov = Provenance {
            digest: "ab".into(),
            seed: 3,
        };
        let mut buf = Vec::new();
        write_exclusion(&mut buf, &report, &prov).unwrap();
        let (back, prov_back) = read_exclusion(&mut buf.as_slice()).unwrap();
        assert_eq!(prov_back, prov);
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].n95_star, 18_700);
        assert!(back[1].discovery);
        assert!((back[0].g_limit_gev_inv / 7.1e-14 - 1.0).abs() < 1e-6);
    }
}
