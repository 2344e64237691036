//! Simulation and inference for a photon-counting axion haloscope: signal
//! power and scan-rate physics, cavity response and calibration, the cyclic
//! differential counting protocol, detector click streams, and the chain
//! from counts to coupling limits.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cavity;
pub mod config;
pub mod constants;
pub mod error;
pub mod format;
pub mod lm;
pub mod physics;
pub mod protocol;
pub mod qubit;
pub mod smpd;
pub mod special;

pub use analysis::{CountWindow, ExclusionPoint, ExclusionReport, LimitOptions, SignificanceResult};
pub use cavity::CavityMode;
pub use config::RunConfig;
pub use error::{Error, Result};
pub use format::Provenance;
pub use physics::{DetectorFigures, HaloscopeConfig};
pub use protocol::{Block, BlockKind, Phase, ProtocolSchedule, ProtocolTimings, TuningPlan};
pub use qubit::{DispersiveParams, RamseyObservation};
pub use smpd::{ClickRecord, ClickStream, SmpdParams, TruthParams};
