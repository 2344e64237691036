use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Block, BlockKind, Phase, ProtocolSchedule};
use crate::smpd::{ClickRecord, ClickSink};

/// Counts of one frequency step: on-resonance dark counts against the sum of
/// the four sidebands, which get the same live time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountWindow {
    pub step: u64,
    /// First and last instants of dark counting in the step [s].
    pub start_s: f64,
    pub end_s: f64,
    /// Cavity frequency at the middle of the step [Hz].
    pub nu_c_hz: f64,
    pub n_c: u64,
    pub n_b: u64,
    /// Live time on resonance and summed over the sidebands [s].
    pub live_c_s: f64,
    pub live_b_s: f64,
    /// Efficiency-check clicks and live time (signal ON).
    pub n_on: u64,
    pub live_on_s: f64,
}

/// Accumulates clicks into per-step windows as they arrive, so long runs need
/// not keep individual clicks.
#[derive(Debug, Clone)]
pub struct WindowBinner {
    windows: Vec<CountWindow>,
}

impl WindowBinner {
    pub fn new(schedule: &ProtocolSchedule) -> Self {
        let n = schedule.n_steps() as usize;
        let mut windows: Vec<CountWindow> = (0..n as u64)
            .map(|step| CountWindow {
                step,
                start_s: f64::INFINITY,
                end_s: f64::NEG_INFINITY,
                nu_c_hz: 0.0,
                n_c: 0,
                n_b: 0,
                live_c_s: 0.0,
                live_b_s: 0.0,
                n_on: 0,
                live_on_s: 0.0,
            })
            .collect();
        for b in schedule.blocks().filter(|b| b.kind == BlockKind::Detect) {
            let Some(step) = b.step else { continue };
            let w = &mut windows[step as usize];
            match (b.phase, b.label) {
                (Phase::On, _) => w.live_on_s += b.duration_s(),
                (Phase::Off, 0) => w.live_c_s += b.duration_s(),
                (Phase::Off, _) => w.live_b_s += b.duration_s(),
            }
            if b.phase == Phase::Off {
                w.start_s = w.start_s.min(b.start_s());
                w.end_s = w.end_s.max(b.start_s() + b.duration_s());
            }
        }
        for w in &mut windows {
            if w.start_s.is_finite() {
                w.nu_c_hz = schedule.nu_c(0.5 * (w.start_s + w.end_s));
            }
        }
        Self { windows }
    }

    pub fn add(&mut self, click: &ClickRecord, step: u64) {
        let w = &mut self.windows[step as usize];
        match (click.phase, click.label) {
            (Phase::On, _) => w.n_on += 1,
            (Phase::Off, 0) => w.n_c += 1,
            (Phase::Off, _) => w.n_b += 1,
        }
    }

    pub fn finish(self) -> Vec<CountWindow> {
        self.windows
    }
}

impl ClickSink for WindowBinner {
    fn push(&mut self, click: ClickRecord, block: &Block) {
        if let Some(step) = block.step {
            self.add(&click, step);
        }
    }
}

/// The frequency step a click belongs to, after checking that the schedule
/// was counting with the click's label and phase at that instant.
pub fn click_step(schedule: &ProtocolSchedule, c: &ClickRecord) -> Result<u64> {
    let state = schedule
        .state_at_ns(c.t_ns)
        .map_err(|_| Error::Mismatch(format!("click at {:.9} s lies beyond the schedule", c.t_s())))?;
    if state.kind != BlockKind::Detect || state.label != c.label || state.phase != c.phase {
        return Err(Error::Mismatch(format!(
            "click at {:.9} s tagged ({}, {}) but the schedule has {} ({}, {})",
            c.t_s(),
            c.label,
            c.phase,
            state.kind,
            state.label,
            state.phase
        )));
    }
    state
        .block
        .step
        .ok_or_else(|| Error::Mismatch(format!("click at {:.9} s outside any frequency step", c.t_s())))
}

/// Bins a click stream by frequency step, checking every click against the
/// schedule.
pub fn bin_counts(clicks: &[ClickRecord], schedule: &ProtocolSchedule) -> Result<Vec<CountWindow>> {
    let mut binner = WindowBinner::new(schedule);
    for c in clicks {
        binner.add(c, click_step(schedule, c)?);
    }
    Ok(binner.finish())
}

/// Per-window rates: on resonance, sidebands and their difference [1/s].
pub fn window_rates(windows: &[CountWindow]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut c = Vec::with_capacity(windows.len());
    let mut b = Vec::with_capacity(windows.len());
    let mut d = Vec::with_capacity(windows.len());
    for w in windows {
        let rc = w.n_c as f64 / w.live_c_s;
        let rb = w.n_b as f64 / w.live_b_s;
        c.push(rc);
        b.push(rb);
        d.push(rc - rb);
    }
    (c, b, d)
}

/// Dark-count rates in fixed wall-clock bins, for Allan analysis at
/// averaging times shorter than a frequency step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub base_tau_s: f64,
    /// Start of each kept bin [s].
    pub t_s: Vec<f64>,
    pub cavity: Vec<f64>,
    pub sidebands: Vec<f64>,
    pub difference: Vec<f64>,
    /// Bins dropped for lack of live time in either channel.
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct RateBin {
    n_c: u64,
    n_b: u64,
    live_c_s: f64,
    live_b_s: f64,
}

/// Accumulates dark clicks into bins of `base_tau_s`; live time of blocks
/// straddling a bin edge is split by overlap.
#[derive(Debug, Clone)]
pub struct RateBinner {
    base_ns: u64,
    bins: Vec<RateBin>,
}

impl RateBinner {
    pub fn new(schedule: &ProtocolSchedule, base_tau_s: f64) -> Result<Self> {
        if !(base_tau_s > 0.0) {
            return Err(Error::domain("bin width must be positive"));
        }
        let base_ns = crate::protocol::s_to_ns(base_tau_s).max(1);
        let n = schedule.duration_ns().div_ceil(base_ns) as usize;
        let mut bins = vec![RateBin::default(); n];
        for b in schedule.blocks().filter(|b| b.is_dark_detect()) {
            let mut t = b.start_ns;
            while t < b.end_ns() {
                let i = (t / base_ns) as usize;
                let edge = ((i as u64 + 1) * base_ns).min(b.end_ns());
                let live = crate::protocol::ns_to_s(edge - t);
                if b.label == 0 {
                    bins[i].live_c_s += live;
                } else {
                    bins[i].live_b_s += live;
                }
                t = edge;
            }
        }
        Ok(Self { base_ns, bins })
    }

    pub fn add(&mut self, click: &ClickRecord) {
        if click.phase != Phase::Off {
            return;
        }
        if let Some(bin) = self.bins.get_mut((click.t_ns / self.base_ns) as usize) {
            if click.label == 0 {
                bin.n_c += 1;
            } else {
                bin.n_b += 1;
            }
        }
    }

    /// Rates per kept bin. Bins whose live time in either channel is below
    /// `min_live_fraction` of the median are dropped.
    pub fn finish(self, min_live_fraction: f64) -> RateSeries {
        let mut live: Vec<f64> = self.bins.iter().map(|b| b.live_c_s.min(b.live_b_s)).collect();
        live.sort_by(f64::total_cmp);
        let median = live.get(live.len() / 2).copied().unwrap_or(0.0);
        let floor = (min_live_fraction * median).max(f64::MIN_POSITIVE);
        let base_tau_s = crate::protocol::ns_to_s(self.base_ns);
        let mut out = RateSeries {
            base_tau_s,
            t_s: Vec::new(),
            cavity: Vec::new(),
            sidebands: Vec::new(),
            difference: Vec::new(),
            dropped: 0,
        };
        for (i, b) in self.bins.iter().enumerate() {
            if b.live_c_s < floor || b.live_b_s < floor {
                out.dropped += 1;
                continue;
            }
            let rc = b.n_c as f64 / b.live_c_s;
            let rb = b.n_b as f64 / b.live_b_s;
            out.t_s.push(i as f64 * base_tau_s);
            out.cavity.push(rc);
            out.sidebands.push(rb);
            out.difference.push(rc - rb);
        }
        out
    }
}

impl ClickSink for RateBinner {
    fn push(&mut self, click: ClickRecord, _block: &Block) {
        self.add(&click);
    }
}
