//! Run configuration: every section defaults to the 2024 operating point, and
//! unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::analysis::LimitOptions;
use crate::error::{Error, Result};
use crate::physics::{DetectorFigures, HaloscopeConfig};
use crate::protocol::{build_schedule_with, ProtocolSchedule, ProtocolTimings, TuningPlan};
use crate::qubit::DispersiveParams;
use crate::smpd::{SmpdParams, TruthParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub limits: LimitOptions,
    /// Longest Allan averaging time [s].
    pub allan_max_tau_s: f64,
    pub allan_per_decade: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            limits: LimitOptions::default(),
            allan_max_tau_s: 3600.0,
            allan_per_decade: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stream: String,
    pub schedule: String,
    pub exclusion: String,
    pub summary: String,
    /// Write the click stream in the binary record format.
    pub binary_stream: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            stream: "clicks.txt".into(),
            schedule: "schedule.txt".into(),
            exclusion: "exclusion.txt".into(),
            summary: "summary.json".into(),
            binary_stream: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of super-cycles; enough to cover the tuning span when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub super_cycles: Option<u64>,
    pub haloscope: HaloscopeConfig,
    pub detector: DetectorFigures,
    pub smpd: SmpdParams,
    pub truth: TruthParams,
    pub plan: TuningPlan,
    pub protocol: ProtocolTimings,
    pub analysis: AnalysisConfig,
    pub calibration: DispersiveParams,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::paper2024()
    }
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}

impl RunConfig {
    pub fn paper2024() -> Self {
        Self {
            seed: 0,
            super_cycles: None,
            haloscope: HaloscopeConfig::paper2024(),
            detector: DetectorFigures::paper2024(),
            smpd: SmpdParams::paper2024(),
            truth: TruthParams::background_only(0),
            plan: TuningPlan::default(),
            protocol: ProtocolTimings::default(),
            analysis: AnalysisConfig::default(),
            calibration: DispersiveParams::paper2024(),
            output: OutputConfig::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper2024" => Ok(Self::paper2024()),
            other => Err(Error::config("preset", format!("unknown preset `{other}`"))),
        }
    }

    /// Parses and validates TOML text; syntax and schema errors carry the line.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Format {
                line,
                reason: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.haloscope.validate().map_err(|e| prefixed("haloscope", e))?;
        self.detector.validate().map_err(|e| prefixed("detector", e))?;
        self.smpd.validate().map_err(|e| prefixed("smpd", e))?;
        self.truth.validate().map_err(|e| prefixed("truth", e))?;
        self.plan.validate().map_err(|e| prefixed("plan", e))?;
        self.protocol.validate().map_err(|e| prefixed("protocol", e))?;
        self.calibration.validate().map_err(|e| prefixed("calibration", e))?;
        let l = &self.analysis.limits;
        if !(l.dt_m_s > 0.0) {
            return Err(Error::config("analysis.limits.dt_m_s", "must be positive"));
        }
        if !(l.cl.cl > 0.0 && l.cl.cl < 1.0 && l.cl.z > 0.0) {
            return Err(Error::config("analysis.limits.cl", "needs cl in (0, 1) and z > 0"));
        }
        if let crate::analysis::BiasPolicy::Fixed(k) = l.bias {
            if !(k > -1.0) {
                return Err(Error::config("analysis.limits.bias", "must exceed -1"));
            }
        }
        if self.analysis.allan_per_decade == 0 {
            return Err(Error::config("analysis.allan_per_decade", "must be positive"));
        }
        if self.super_cycles == Some(0) {
            return Err(Error::config("super_cycles", "must be positive"));
        }
        Ok(())
    }

    /// Truth parameters with the run seed applied.
    pub fn seeded_truth(&self) -> TruthParams {
        TruthParams {
            seed: self.seed,
            ..self.truth
        }
    }

    /// Super-cycles to run: the configured count, or enough to reach the end
    /// of the tuning span.
    pub fn n_super_cycles(&self) -> Result<u64> {
        if let Some(n) = self.super_cycles {
            return Ok(n);
        }
        let one = build_schedule_with(&self.smpd, &self.plan, &self.protocol, 1)?;
        let need = self.plan.duration_to_cover_s();
        if !need.is_finite() {
            return Err(Error::config(
                "super_cycles",
                "required when the tuning speed is zero",
            ));
        }
        Ok(((need / one.duration_s()).ceil() as u64).max(1))
    }

    pub fn schedule(&self) -> Result<ProtocolSchedule> {
        build_schedule_with(&self.smpd, &self.plan, &self.protocol, self.n_super_cycles()?)
    }

    /// SHA-256 over everything that shapes the data; output paths excluded.
    pub fn digest(&self) -> String {
        let mut view = self.clone();
        view.output = OutputConfig::default();
        let json = serde_json::to_vec(&view).expect("configuration serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_preset() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::paper2024());
    }

    #[test]
    fn roundtrip_through_toml() {
        let cfg = RunConfig {
            seed: 17,
            super_cycles: Some(3),
            ..RunConfig::paper2024()
        };
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg = RunConfig::from_toml_str("seed = 5\n[smpd]\neta0 = 0.47\n[haloscope]\nb0_tesla = 12.0\n").unwrap();
        assert_eq!(cfg.smpd.eta0, 0.47);
        assert_eq!(cfg.smpd.tone_flux_per_s, SmpdParams::paper2024().tone_flux_per_s);
        assert_eq!(cfg.haloscope.b0_tesla, 12.0);
        assert_eq!(cfg.seeded_truth().seed, 5);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::from_toml_str("seed = 1\n\n[smpd]\neta = 0.5\n").unwrap_err();
        match err {
            Error::Format { line, reason } => {
                assert_eq!(line, 4, "{reason}");
                assert!(reason.contains("eta"), "{reason}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn invalid_value_names_the_field() {
        let err = RunConfig::from_toml_str("[plan]\nspeed_hz_per_hour = 5e4\n").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { ref field, .. } if field == "plan.speed_hz_per_hour"));
    }

    #[test]
    fn digest_tracks_physics_not_paths() {
        let a = RunConfig::paper2024();
        let mut b = a.clone();
        b.output.dir = "/elsewhere".into();
        assert_eq!(a.digest(), b.digest());
        b.smpd.eta0 = 0.5;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn default_run_covers_the_span() {
        let cfg = RunConfig::paper2024();
        let n = cfg.n_super_cycles().unwrap();
        // 0.4 MHz at 5 kHz/h is 80 h of 920 s super-cycles.
        assert_eq!(n, (80.0f64 * 3600.0 / 920.0).ceil() as u64);
    }
}
