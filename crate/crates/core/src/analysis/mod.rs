//! From clicks to limits: per-step count windows, Allan variance, the bias
//! between cavity and sideband channels, the likelihood-ratio significance,
//! count limits, power and coupling limits per cavity linewidth.

mod allan;
mod limits;
mod report;
mod stats;
mod windows;

pub use allan::{allan_variance, log_spaced_taus, loglog_slope, AllanPoint};
pub use limits::{
    coupling_limit, exclusion_curve, limit_power, partition_subintervals, select_subinterval, BiasPolicy,
    ExclusionPoint, ExclusionReport, LimitOptions, SubInterval,
};
pub use report::{read_exclusion, write_exclusion, AllanTables, RunSummary};
pub use stats::{
    estimate_bias, significance, signal_upper_limit, signed_significance, upper_limit_counts, BiasEstimate,
    ConfidenceLevel, SignificanceResult, UpperLimit,
};
pub use windows::{bin_counts, click_step, window_rates, CountWindow, RateBinner, RateSeries, WindowBinner};
