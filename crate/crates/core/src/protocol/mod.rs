//! Nested measurement cycles: buffer detuning pattern, signal ON/OFF blocks,
//! tuning pulses, calibration slots and the cavity frequency ramp.
//!
//! Times are whole nanoseconds from the start of the run. Blocks are
//! half-open intervals `[start, start + duration)` and tile the run without
//! gaps. Only one super-cycle is stored; later ones are offsets of it.

mod io;

pub use io::{read_schedule, write_schedule, ScheduleHeader};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::smpd::SmpdParams;

/// Hard upper bound on the cavity tuning speed [Hz/h].
pub const MAX_TUNING_SPEED_HZ_PER_HOUR: f64 = 12e3;

pub const NS_PER_S: u64 = 1_000_000_000;

pub fn ns_to_s(ns: u64) -> f64 {
    ns as f64 * 1e-9
}

pub fn s_to_ns(s: f64) -> u64 {
    (s * 1e9).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    /// Calibrated tone applied at the buffer.
    On,
    /// Dark counting.
    Off,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::On => "ON",
            Phase::Off => "OFF",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ON" => Ok(Phase::On),
            "OFF" => Ok(Phase::Off),
            _ => Err(format!("unknown phase `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BlockKind {
    Detect,
    Calibrate,
    Tune,
    Wait,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Detect => "DETECT",
            BlockKind::Calibrate => "CALIBRATE",
            BlockKind::Tune => "TUNE",
            BlockKind::Wait => "WAIT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start_ns: u64,
    pub duration_ns: u64,
    /// Buffer detuning in units of the label spacing.
    pub label: i8,
    pub phase: Phase,
    pub kind: BlockKind,
    /// Index of the enclosing frequency step (one per tuning pulse); `None`
    /// for calibration and overhead blocks.
    pub step: Option<u64>,
}

impl Block {
    pub fn end_ns(&self) -> u64 {
        self.start_ns + self.duration_ns
    }

    pub fn contains_ns(&self, t_ns: u64) -> bool {
        t_ns >= self.start_ns && t_ns < self.end_ns()
    }

    pub fn start_s(&self) -> f64 {
        ns_to_s(self.start_ns)
    }

    pub fn duration_s(&self) -> f64 {
        ns_to_s(self.duration_ns)
    }

    /// A dark-count block, the only kind entering the axion analysis.
    pub fn is_dark_detect(&self) -> bool {
        self.kind == BlockKind::Detect && self.phase == Phase::Off
    }
}

/// Durations and counts of the nested cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolTimings {
    pub flux_ramp_s: f64,
    pub ramp_pause_s: f64,
    /// Detection cycles per dark block.
    pub dark_cycles: u64,
    /// Detection cycles per efficiency (signal ON) block.
    pub on_cycles: u64,
    /// Buffer labels visited by one sequence.
    pub pattern: Vec<i8>,
    /// Sequences per frequency step.
    pub repetitions: u64,
    pub tune_pulse_s: f64,
    pub settle_s: f64,
    /// Wall time of one frequency step including loading and saving.
    pub step_s: f64,
    pub steps_per_super_cycle: u64,
    pub calibration_s: f64,
    /// Unitemized overhead per super-cycle (processing, saving, waits).
    pub super_cycle_overhead_s: f64,
    /// Buffer detuning per label [Hz].
    pub label_spacing_hz: f64,
}

impl Default for ProtocolTimings {
    fn default() -> Self {
        Self {
            flux_ramp_s: 0.72e-3,
            ramp_pause_s: 0.1e-3,
            dark_cycles: 8001,
            on_cycles: 801,
            pattern: vec![0, 0, 1, 2, 2, 1, 0, 0, 0, 0, -1, -2, -2, -1, 0, 0],
            repetitions: 36,
            tune_pulse_s: 0.1,
            settle_s: 5.0,
            step_s: 78.0,
            steps_per_super_cycle: 10,
            calibration_s: 78.0,
            super_cycle_overhead_s: 62.0,
            label_spacing_hz: 1e6,
        }
    }
}

impl ProtocolTimings {
    pub fn validate(&self) -> Result<()> {
        if self.pattern.is_empty() {
            return Err(Error::config("pattern", "must not be empty"));
        }
        let on: usize = self.pattern.iter().filter(|l| **l == 0).count();
        if 2 * on != self.pattern.len() {
            return Err(Error::config(
                "pattern",
                "must spend equal time at and away from resonance",
            ));
        }
        if self.dark_cycles == 0 || self.repetitions == 0 || self.steps_per_super_cycle == 0 {
            return Err(Error::config("protocol", "cycle counts must be positive"));
        }
        for (name, v) in [
            ("flux_ramp_s", self.flux_ramp_s),
            ("ramp_pause_s", self.ramp_pause_s),
            ("tune_pulse_s", self.tune_pulse_s),
            ("settle_s", self.settle_s),
            ("calibration_s", self.calibration_s),
            ("super_cycle_overhead_s", self.super_cycle_overhead_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be non-negative"));
            }
        }
        if !(self.label_spacing_hz > 0.0) {
            return Err(Error::config("label_spacing_hz", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningPlan {
    pub start_hz: f64,
    pub speed_hz_per_hour: f64,
    /// The cavity stops at `start_hz + span_hz`.
    pub span_hz: f64,
}

impl Default for TuningPlan {
    fn default() -> Self {
        Self {
            start_hz: 7.3692e9,
            speed_hz_per_hour: 5e3,
            span_hz: 0.4e6,
        }
    }
}

impl TuningPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_hz > 0.0) {
            return Err(Error::config("start_hz", "must be positive"));
        }
        if !(self.speed_hz_per_hour >= 0.0) {
            return Err(Error::config("speed_hz_per_hour", "must be non-negative"));
        }
        if self.speed_hz_per_hour > MAX_TUNING_SPEED_HZ_PER_HOUR {
            return Err(Error::config(
                "speed_hz_per_hour",
                format!(
                    "{} Hz/h exceeds the {} Hz/h cap",
                    self.speed_hz_per_hour, MAX_TUNING_SPEED_HZ_PER_HOUR
                ),
            ));
        }
        if !(self.span_hz >= 0.0) {
            return Err(Error::config("span_hz", "must be non-negative"));
        }
        Ok(())
    }

    /// Cavity frequency at time `t` [s]: a linear ramp held at the span end.
    pub fn nu_c(&self, t: f64) -> f64 {
        self.start_hz + (self.speed_hz_per_hour * t / 3600.0).min(self.span_hz)
    }

    /// Frequency advanced per tuning pulse for pulses `spacing_s` apart.
    pub fn step_hz(&self, spacing_s: f64) -> f64 {
        self.speed_hz_per_hour * spacing_s / 3600.0
    }

    /// Time at which the ramp reaches the end of the span.
    pub fn duration_to_cover_s(&self) -> f64 {
        if self.speed_hz_per_hour == 0.0 {
            f64::INFINITY
        } else {
            3600.0 * self.span_hz / self.speed_hz_per_hour
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    template: Vec<Block>,
    super_cycle_ns: u64,
    n_super_cycles: u64,
    plan: TuningPlan,
    timings: ProtocolTimings,
    mean_cycle_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub block_index: u64,
    pub block: Block,
    pub label: i8,
    pub phase: Phase,
    pub kind: BlockKind,
    pub nu_c_hz: f64,
    /// Buffer detuning from the cavity, label times the label spacing [Hz].
    pub delta_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationTask {
    /// Reflection spectroscopy of the haloscope mode.
    HaloscopeFrequency,
    /// Buffer frequency and bandwidth versus bias, then realignment.
    SmpdRetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSlot {
    pub t_s: f64,
    pub duration_s: f64,
    pub tasks: [CalibrationTask; 2],
}

/// Time budget of one super-cycle [s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAccounting {
    pub super_cycle_s: f64,
    /// Dark counting with the buffer on the cavity.
    pub on_resonance_s: f64,
    /// Dark counting with the buffer on a sideband.
    pub sideband_s: f64,
    /// Efficiency checks (signal ON).
    pub efficiency_check_s: f64,
    /// Everything other than dark counting.
    pub dead_s: f64,
    pub dead_fraction: f64,
    /// On-resonance share of dark counting time.
    pub differential_duty: f64,
    /// Dark counting time over wall time.
    pub detect_duty: f64,
}

/// Builds `n_super_cycles` repetitions of the nested protocol.
pub fn build_schedule(smpd: &SmpdParams, plan: &TuningPlan, n_super_cycles: u64) -> Result<ProtocolSchedule> {
    build_schedule_with(smpd, plan, &ProtocolTimings::default(), n_super_cycles)
}

pub fn build_schedule_with(
    smpd: &SmpdParams,
    plan: &TuningPlan,
    timings: &ProtocolTimings,
    n_super_cycles: u64,
) -> Result<ProtocolSchedule> {
    smpd.validate()?;
    assemble(smpd.mean_cycle_ns(), plan, timings, n_super_cycles)
}

/// Builds the schedule from an already validated mean cycle length.
pub(crate) fn assemble(
    cycle: u64,
    plan: &TuningPlan,
    timings: &ProtocolTimings,
    n_super_cycles: u64,
) -> Result<ProtocolSchedule> {
    plan.validate()?;
    timings.validate()?;
    if cycle == 0 {
        return Err(Error::config("mean_cycle_ns", "must be positive"));
    }
    let ramp = s_to_ns(timings.flux_ramp_s + timings.ramp_pause_s);
    let dark = timings.dark_cycles * cycle;
    let on = timings.on_cycles * cycle;
    let tune = s_to_ns(timings.tune_pulse_s);
    let settle = s_to_ns(timings.settle_s);
    let step_len = s_to_ns(timings.step_s);
    let per_sequence = timings.pattern.len() as u64 * (ramp + dark + on);
    let busy = tune + settle + timings.repetitions * per_sequence;
    if busy > step_len {
        return Err(Error::config(
            "step_s",
            format!("step needs {:.3} s but lasts {:.3} s", ns_to_s(busy), ns_to_s(step_len)),
        ));
    }

    let mut template = Vec::new();
    let mut t = 0u64;
    let mut push = |t: &mut u64, duration: u64, label: i8, phase: Phase, kind: BlockKind, step: Option<u64>| {
        if duration > 0 {
            template.push(Block {
                start_ns: *t,
                duration_ns: duration,
                label,
                phase,
                kind,
                step,
            });
            *t += duration;
        }
    };
    push(&mut t, s_to_ns(timings.calibration_s), 0, Phase::Off, BlockKind::Calibrate, None);
    push(&mut t, s_to_ns(timings.super_cycle_overhead_s), 0, Phase::Off, BlockKind::Wait, None);
    for k in 0..timings.steps_per_super_cycle {
        let step = Some(k);
        push(&mut t, tune, 0, Phase::Off, BlockKind::Tune, step);
        push(&mut t, settle, 0, Phase::Off, BlockKind::Wait, step);
        for _ in 0..timings.repetitions {
            for &label in &timings.pattern {
                push(&mut t, ramp, label, Phase::Off, BlockKind::Wait, step);
                push(&mut t, dark, label, Phase::Off, BlockKind::Detect, step);
                push(&mut t, on, label, Phase::On, BlockKind::Detect, step);
            }
        }
        push(&mut t, step_len - busy, 0, Phase::Off, BlockKind::Wait, step);
    }
    Ok(ProtocolSchedule {
        template,
        super_cycle_ns: t,
        n_super_cycles,
        plan: *plan,
        timings: timings.clone(),
        mean_cycle_ns: cycle,
    })
}

impl ProtocolSchedule {
    pub fn plan(&self) -> &TuningPlan {
        &self.plan
    }

    pub fn timings(&self) -> &ProtocolTimings {
        &self.timings
    }

    pub fn mean_cycle_ns(&self) -> u64 {
        self.mean_cycle_ns
    }

    pub fn n_super_cycles(&self) -> u64 {
        self.n_super_cycles
    }

    pub fn super_cycle_ns(&self) -> u64 {
        self.super_cycle_ns
    }

    pub fn steps_per_super_cycle(&self) -> u64 {
        self.timings.steps_per_super_cycle
    }

    pub fn n_steps(&self) -> u64 {
        self.n_super_cycles * self.timings.steps_per_super_cycle
    }

    pub fn blocks_per_super_cycle(&self) -> usize {
        self.template.len()
    }

    pub fn len(&self) -> u64 {
        self.template.len() as u64 * self.n_super_cycles
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_ns(&self) -> u64 {
        self.super_cycle_ns * self.n_super_cycles
    }

    pub fn duration_s(&self) -> f64 {
        ns_to_s(self.duration_ns())
    }

    /// Block `i` in absolute time, with its step index made global.
    pub fn block(&self, i: u64) -> Option<Block> {
        let per = self.template.len() as u64;
        if per == 0 || i >= self.len() {
            return None;
        }
        let (cycle, j) = (i / per, (i % per) as usize);
        let mut b = self.template[j];
        b.start_ns += cycle * self.super_cycle_ns;
        b.step = b.step.map(|s| s + cycle * self.timings.steps_per_super_cycle);
        Some(b)
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        (0..self.len()).map(move |i| self.block(i).expect("index in range"))
    }

    pub fn nu_c(&self, t_s: f64) -> f64 {
        self.plan.nu_c(t_s)
    }

    /// State at `t_ns`; a boundary belongs to the block that starts there.
    pub fn state_at_ns(&self, t_ns: u64) -> Result<ScheduleState> {
        let end = self.duration_ns();
        if t_ns >= end {
            return Err(Error::OutOfRange {
                t: ns_to_s(t_ns),
                end: ns_to_s(end),
            });
        }
        let cycle = t_ns / self.super_cycle_ns;
        let local = t_ns % self.super_cycle_ns;
        let j = self.template.partition_point(|b| b.start_ns <= local) - 1;
        let index = cycle * self.template.len() as u64 + j as u64;
        let block = self.block(index).expect("index in range");
        Ok(ScheduleState {
            block_index: index,
            block,
            label: block.label,
            phase: block.phase,
            kind: block.kind,
            nu_c_hz: self.nu_c(ns_to_s(t_ns)),
            delta_hz: block.label as f64 * self.timings.label_spacing_hz,
        })
    }

    pub fn accounting(&self) -> ScheduleAccounting {
        let (mut on_res, mut side, mut check) = (0u64, 0u64, 0u64);
        for b in self.template.iter().filter(|b| b.kind == BlockKind::Detect) {
            match (b.phase, b.label) {
                (Phase::On, _) => check += b.duration_ns,
                (Phase::Off, 0) => on_res += b.duration_ns,
                (Phase::Off, _) => side += b.duration_ns,
            }
        }
        let wall = ns_to_s(self.super_cycle_ns);
        let dark = ns_to_s(on_res + side);
        ScheduleAccounting {
            super_cycle_s: wall,
            on_resonance_s: ns_to_s(on_res),
            sideband_s: ns_to_s(side),
            efficiency_check_s: ns_to_s(check),
            dead_s: wall - dark,
            dead_fraction: (wall - dark) / wall,
            differential_duty: ns_to_s(on_res) / dark,
            detect_duty: dark / wall,
        }
    }
}

/// State of `schedule` at `t` seconds, rounded to the nearest nanosecond.
pub fn schedule_state(schedule: &ProtocolSchedule, t: f64) -> Result<ScheduleState> {
    if !(t >= 0.0) {
        return Err(Error::OutOfRange {
            t,
            end: schedule.duration_s(),
        });
    }
    schedule.state_at_ns(s_to_ns(t))
}

/// One calibration slot per super-cycle, in time order.
pub fn calibration_slots(schedule: &ProtocolSchedule) -> Vec<CalibrationSlot> {
    let Some(cal) = schedule
        .template
        .iter()
        .find(|b| b.kind == BlockKind::Calibrate)
    else {
        return Vec::new();
    };
    (0..schedule.n_super_cycles)
        .map(|k| CalibrationSlot {
            t_s: ns_to_s(cal.start_ns + k * schedule.super_cycle_ns),
            duration_s: cal.duration_s(),
            tasks: [CalibrationTask::HaloscopeFrequency, CalibrationTask::SmpdRetune],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(n: u64) -> ProtocolSchedule {
        build_schedule(&SmpdParams::paper2024(), &TuningPlan::default(), n).unwrap()
    }

    #[test]
    fn super_cycle_accounting() {
        let a = one(1).accounting();
        assert!((a.super_cycle_s - 920.0).abs() < 1e-9);
        assert!((a.on_resonance_s - 285.34).abs() < 0.01, "{}", a.on_resonance_s);
        assert_eq!(a.on_resonance_s, a.sideband_s);
        assert!((a.dead_fraction - 0.38).abs() < 0.005, "{}", a.dead_fraction);
        assert!((a.differential_duty - 0.5).abs() < 1e-15);
        assert!((a.detect_duty - 0.62).abs() < 0.005);
    }

    #[test]
    fn dark_block_length() {
        let s = one(1);
        let b = s.blocks().find(|b| b.is_dark_detect()).unwrap();
        assert_eq!(b.duration_ns, 8001 * 12_383);
        assert!((b.duration_s() / 99.075e-3 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn blocks_tile_without_gaps() {
        let s = one(2);
        let mut t = 0;
        for b in s.blocks() {
            assert_eq!(b.start_ns, t);
            assert!(b.duration_ns > 0);
            t = b.end_ns();
        }
        assert_eq!(t, s.duration_ns());
    }

    #[test]
    fn empty_schedule() {
        let s = one(0);
        assert!(s.is_empty());
        assert_eq!(s.duration_ns(), 0);
        assert!(calibration_slots(&s).is_empty());
        assert!(schedule_state(&s, 0.0).is_err());
    }

    #[test]
    fn pattern_replays() {
        let s = one(1);
        let labels: Vec<i8> = s
            .blocks()
            .filter(|b| b.is_dark_detect() && b.step == Some(3))
            .map(|b| b.label)
            .take(16)
            .collect();
        assert_eq!(labels, ProtocolTimings::default().pattern);
    }

    #[test]
    fn boundary_belongs_to_next_block() {
        let s = one(1);
        let b = s.blocks().find(|b| b.is_dark_detect() && b.label == 2).unwrap();
        let st = s.state_at_ns(b.start_ns).unwrap();
        assert_eq!((st.label, st.phase, st.kind), (2, Phase::Off, BlockKind::Detect));
        assert_eq!(st.delta_hz, 2e6);
        let prev = s.state_at_ns(b.start_ns - 1).unwrap();
        assert_eq!(prev.kind, BlockKind::Wait);
        let next = s.state_at_ns(b.end_ns()).unwrap();
        assert_eq!(next.phase, Phase::On);
    }

    #[test]
    fn out_of_range() {
        let s = one(1);
        assert!(matches!(
            schedule_state(&s, 920.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(schedule_state(&s, -1.0).is_err());
    }

    #[test]
    fn later_super_cycles_shift_steps() {
        let s = one(3);
        let st = schedule_state(&s, 2.0 * 920.0 + 150.0).unwrap();
        assert_eq!(st.block.step, Some(20));
    }

    #[test]
    fn calibration_slots_spacing() {
        let s = one(3);
        let slots = calibration_slots(&s);
        assert_eq!(slots.len(), 3);
        assert!((slots[1].t_s - slots[0].t_s - 920.0).abs() < 1e-9);
        assert_eq!(slots[0].duration_s, 78.0);
        assert_eq!(slots[0].tasks[0], CalibrationTask::HaloscopeFrequency);
    }

    #[test]
    fn tuning_ramp() {
        let plan = TuningPlan {
            start_hz: 7.37e9,
            speed_hz_per_hour: 5e3,
            span_hz: 60e3,
        };
        let s = build_schedule(&SmpdParams::paper2024(), &plan, 48).unwrap();
        assert!(s.duration_s() > 12.0 * 3600.0);
        assert_eq!(s.nu_c(s.duration_s()), plan.start_hz + 60e3);
        assert!((plan.nu_c(12.0 * 3600.0) - plan.start_hz - 60e3).abs() < 1e-6);
    }

    #[test]
    fn speed_cap() {
        let plan = TuningPlan {
            speed_hz_per_hour: 12.5e3,
            ..TuningPlan::default()
        };
        assert!(build_schedule(&SmpdParams::paper2024(), &plan, 1).is_err());
    }

    #[test]
    fn step_overflow_rejected() {
        let t = ProtocolTimings {
            repetitions: 50,
            ..ProtocolTimings::default()
        };
        assert!(build_schedule_with(&SmpdParams::paper2024(), &TuningPlan::default(), &t, 1).is_err());
    }
}
