use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{photon_inflow, rate_from_inflow, NoiseProcess, NoiseSample, SmpdParams, TruthParams};
use crate::error::Result;
use crate::protocol::{ns_to_s, Block, BlockKind, Phase, ProtocolSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    /// Nanoseconds since the start of the run.
    pub t_ns: u64,
    pub label: i8,
    pub phase: Phase,
}

impl ClickRecord {
    pub fn t_s(&self) -> f64 {
        ns_to_s(self.t_ns)
    }
}

/// Receives clicks in time order together with the block they fall in.
pub trait ClickSink {
    fn push(&mut self, click: ClickRecord, block: &Block);
}

/// Discards clicks; the generation summary still counts them.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl ClickSink for NullSink {
    fn push(&mut self, _click: ClickRecord, _block: &Block) {}
}

impl ClickSink for Vec<ClickRecord> {
    fn push(&mut self, click: ClickRecord, _block: &Block) {
        Vec::push(self, click);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickStream {
    pub seed: u64,
    pub clicks: Vec<ClickRecord>,
}

impl ClickStream {
    pub fn len(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub clicks: u64,
    pub dark_clicks: u64,
    /// Dark-counting (signal OFF) live time [s].
    pub live_dark_s: f64,
    /// Efficiency-check (signal ON) live time [s].
    pub live_on_s: f64,
    pub wall_s: f64,
}

/// The whole stream in memory.
pub fn generate_click_stream(
    schedule: &ProtocolSchedule,
    params: &SmpdParams,
    truth: &TruthParams,
) -> Result<ClickStream> {
    let mut clicks = Vec::new();
    generate_clicks_into(schedule, params, truth, &mut clicks)?;
    Ok(ClickStream {
        seed: truth.seed,
        clicks,
    })
}

fn interpolate(a: NoiseSample, b: NoiseSample, f: f64) -> NoiseSample {
    NoiseSample {
        eta_rel: a.eta_rel + f * (b.eta_rel - a.eta_rel),
        walk: a.walk + f * (b.walk - a.walk),
    }
}

/// Upper bound on the signal-bearing inflow while the cavity moves between
/// `nu_lo` and `nu_hi`: each Lorentzian factor is maximised separately.
fn inflow_bound(
    block: &Block,
    nu_lo: f64,
    nu_hi: f64,
    delta: f64,
    params: &SmpdParams,
    truth: &TruthParams,
) -> f64 {
    let at = |nu: f64, d: f64| photon_inflow(block.label, block.phase, nu, d, params, truth);
    let mut bound = at(nu_lo, delta).max(at(nu_hi, delta));
    if let Some(nu_a) = truth.signal_nu_hz {
        // Evaluate the signal at its most favourable cavity and buffer positions.
        let cav_nu = nu_a.clamp(nu_lo, nu_hi);
        let buf_nu = (nu_a - delta).clamp(nu_lo, nu_hi);
        let no_signal = TruthParams {
            signal_rate_per_s: 0.0,
            ..*truth
        };
        let base = photon_inflow(block.label, block.phase, nu_lo, delta, params, &no_signal)
            .max(photon_inflow(block.label, block.phase, nu_hi, delta, params, &no_signal));
        let cav = {
            let x = 2.0 * (nu_a - cav_nu) / truth.cavity_linewidth_hz;
            1.0 / (1.0 + x * x)
        };
        let buf = super::buffer_acceptance(nu_a - buf_nu - delta, params.buffer_kappa_hz);
        bound = bound.max(base + truth.signal_rate_per_s * cav * buf);
    }
    bound
}

/// Thinning-based sampling of every DETECT block, streamed into `sink`.
///
/// Drift and walk come from an RNG stream separate from the click draws, so
/// the noise history does not depend on how many clicks were drawn.
pub fn generate_clicks_into<S: ClickSink>(
    schedule: &ProtocolSchedule,
    params: &SmpdParams,
    truth: &TruthParams,
    sink: &mut S,
) -> Result<GenerationSummary> {
    params.validate()?;
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(truth.seed);
    rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(truth.seed);
    noise_rng.set_stream(2);
    let mut noise = NoiseProcess::new(params, noise_rng);
    let spacing = schedule.timings().label_spacing_hz;
    let mut summary = GenerationSummary {
        wall_s: schedule.duration_s(),
        ..Default::default()
    };

    for i in 0..schedule.len() {
        let block = schedule.block(i).expect("index in range");
        if block.kind != BlockKind::Detect {
            continue;
        }
        match block.phase {
            Phase::Off => summary.live_dark_s += block.duration_s(),
            Phase::On => summary.live_on_s += block.duration_s(),
        }
        let delta = block.label as f64 * spacing;
        let mut s = block.start_ns;
        while s < block.end_ns() {
            let (c0, c1, n0, n1) = noise.cell(s);
            let e = block.end_ns().min(c1);
            let width = (c1 - c0) as f64;
            let ns = interpolate(n0, n1, (s - c0) as f64 / width);
            let ne = interpolate(n0, n1, (e - c0) as f64 / width);
            let nu_s = schedule.nu_c(ns_to_s(s));
            let nu_e = schedule.nu_c(ns_to_s(e));
            let bound = NoiseSample {
                eta_rel: ns.eta_rel.max(ne.eta_rel),
                walk: ns.walk.max(ne.walk),
            };
            let inflow_max = inflow_bound(&block, nu_s.min(nu_e), nu_s.max(nu_e), delta, params, truth);
            let majorant = rate_from_inflow(inflow_max, params, bound);
            if majorant > 0.0 {
                let len_s = (e - s) as f64 * 1e-9;
                let mut t = 0.0;
                loop {
                    let gap: f64 = rng.sample(Exp1);
                    t += gap / majorant;
                    if t >= len_s {
                        break;
                    }
                    let t_ns = s + (t * 1e9) as u64;
                    if t_ns >= e {
                        break;
                    }
                    let n = interpolate(n0, n1, (t_ns - c0) as f64 / width);
                    let nu = schedule.nu_c(ns_to_s(t_ns));
                    let inflow = photon_inflow(block.label, block.phase, nu, delta, params, truth);
                    let rate = rate_from_inflow(inflow, params, n);
                    let u: f64 = rng.random();
                    if u * majorant < rate {
                        summary.clicks += 1;
                        if block.phase == Phase::Off {
                            summary.dark_clicks += 1;
                        }
                        sink.push(
                            ClickRecord {
                                t_ns,
                                label: block.label,
                                phase: block.phase,
                            },
                            &block,
                        );
                    }
                }
            }
            s = e;
        }
    }
    Ok(summary)
}
