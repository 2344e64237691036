//! Seeded click streams of the single microwave photon detector.
//!
//! Clicks follow an inhomogeneous Poisson process sampled by thinning:
//!
//! ```text
//! rate = gamma_int + eta(t) [dnu_det n_th (1 + k_b [label 0])
//!                            + signal L_cav L_buf + tone [ON]] + W(t)
//! ```
//!
//! clipped at zero, with `eta(t)` a bounded drift and `W(t)` a common-mode
//! random walk. Only DETECT blocks produce clicks.

mod cycles;
mod io;
mod noise;
mod params;
mod stream;

pub use cycles::{simulate_detection_cycles, CycleRunSummary};
pub use io::{
    for_each_click, read_click_stream, write_click_stream, write_click_stream_binary, ClickWriter, StreamFormat,
};
pub use noise::{NoiseProcess, NoiseSample};
pub use params::{CycleTimings, EfficiencyDrift, ReadoutFidelity, SmpdParams, TruthParams};
pub use stream::{
    generate_click_stream, generate_clicks_into, ClickRecord, ClickSink, ClickStream, GenerationSummary, NullSink,
};

use serde::{Deserialize, Serialize};

use crate::protocol::{ns_to_s, Phase, ProtocolTimings, ScheduleState};

/// Lorentzian power acceptance of the buffer, `1 / (1 + (2 delta / kappa_b)^2)`.
pub fn buffer_acceptance(delta: f64, kappa_b: f64) -> f64 {
    assert!(kappa_b > 0.0, "buffer linewidth must be positive");
    let x = 2.0 * delta / kappa_b;
    1.0 / (1.0 + x * x)
}

/// Lorentzian cavity filter for a signal `detuning` from the mode [Hz].
fn cavity_filter(detuning: f64, linewidth: f64) -> f64 {
    let x = 2.0 * detuning / linewidth;
    1.0 / (1.0 + x * x)
}

/// Detected click rate [1/s] in a given schedule state.
pub fn instantaneous_rate(
    state: &ScheduleState,
    params: &SmpdParams,
    truth: &TruthParams,
    noise: NoiseSample,
) -> f64 {
    let inflow = photon_inflow(state.label, state.phase, state.nu_c_hz, state.delta_hz, params, truth);
    rate_from_inflow(inflow, params, noise)
}

/// Photons per second that the detector converts with efficiency eta.
fn photon_inflow(
    label: i8,
    phase: Phase,
    nu_c: f64,
    delta: f64,
    params: &SmpdParams,
    truth: &TruthParams,
) -> f64 {
    let on_res = if label == 0 { 1.0 } else { 0.0 };
    let thermal =
        params.detector_bandwidth_hz * params.thermal_occupancy(nu_c) * (1.0 + truth.k_b_true * on_res);
    let tone = if phase == Phase::On {
        params.tone_flux_per_s
    } else {
        0.0
    };
    thermal + signal_in_buffer(nu_c, delta, params, truth) + tone
}

fn rate_from_inflow(inflow: f64, params: &SmpdParams, noise: NoiseSample) -> f64 {
    let eta = params.eta0 * (1.0 + noise.eta_rel);
    (params.gamma_int_per_s + eta * inflow + noise.walk).max(0.0)
}

/// Signal photons per second reaching the detector input before efficiency.
fn signal_in_buffer(nu_c: f64, delta: f64, params: &SmpdParams, truth: &TruthParams) -> f64 {
    if truth.signal_rate_per_s == 0.0 {
        return 0.0;
    }
    let (cav, offset) = match truth.signal_nu_hz {
        Some(nu_a) => (cavity_filter(nu_a - nu_c, truth.cavity_linewidth_hz), nu_a - nu_c),
        None => (1.0, 0.0),
    };
    truth.signal_rate_per_s * cav * buffer_acceptance(offset - delta, params.buffer_kappa_hz)
}

/// Nested time budget of the detector and protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTiming {
    /// Mean detection cycle [s].
    pub mean_cycle_s: f64,
    /// Shortest cycle (ground-state readout) from the timings [s].
    pub ground_cycle_s: f64,
    pub dark_block_s: f64,
    pub on_block_s: f64,
    pub super_cycle_s: f64,
    /// On-resonance dark counting per super-cycle [s].
    pub on_resonance_s: f64,
    pub differential_duty: f64,
    pub dead_time_s: f64,
    pub dead_fraction: f64,
}

pub fn cycle_timing(params: &SmpdParams, protocol: &ProtocolTimings) -> crate::error::Result<CycleTiming> {
    let plan = crate::protocol::TuningPlan {
        speed_hz_per_hour: 0.0,
        ..Default::default()
    };
    let schedule = crate::protocol::build_schedule_with(params, &plan, protocol, 1)?;
    let a = schedule.accounting();
    let cycle = schedule.mean_cycle_ns();
    Ok(CycleTiming {
        mean_cycle_s: params.mean_cycle_s(),
        ground_cycle_s: params.cycle.ground_cycle_s(),
        dark_block_s: ns_to_s(protocol.dark_cycles * cycle),
        on_block_s: ns_to_s(protocol.on_cycles * cycle),
        super_cycle_s: a.super_cycle_s,
        on_resonance_s: a.on_resonance_s,
        differential_duty: a.differential_duty,
        dead_time_s: a.dead_s,
        dead_fraction: a.dead_fraction,
    })
}
