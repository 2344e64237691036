//! `haloscope`: simulate click streams, analyse them into coupling limits,
//! plan scans and fit calibrations.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
//! 3 provenance mismatch between inputs, 4 empty or degenerate data.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use haloscope_core::Error;

#[derive(Parser, Debug)]
#[command(name = "haloscope", version, about = "Photon-counting axion haloscope simulator and analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration; sections left out take the preset values.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named parameter preset used when no config file is given.
    #[arg(long, global = true, default_value = "paper2024")]
    pub preset: String,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory, which must exist.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the schedule and simulate the click stream.
    Simulate {
        /// Number of super-cycles (default: enough to cover the tuning span).
        #[arg(long)]
        super_cycles: Option<u64>,
    },
    /// Bin a click stream, estimate the bias and compute the exclusion curve.
    Analyze {
        #[arg(long)]
        stream: Option<PathBuf>,
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Project signal power, speedup and scan speed for the configuration.
    Plan {
        /// Frequency span to cover [Hz] (default: the tuning plan span).
        #[arg(long)]
        span_hz: Option<f64>,
        /// Target model coupling g_gamma (default: the configured one).
        #[arg(long)]
        g_gamma: Option<f64>,
        /// Significance required per cavity linewidth.
        #[arg(long, default_value_t = 2.0)]
        snr: f64,
    },
    /// Fit Stark-shift and dephasing data and derive flux and efficiency.
    Calibrate {
        /// Table with columns delta_Hz,domega_Hz,dgamma_Hz,err_domega,err_dgamma.
        #[arg(long)]
        observations: PathBuf,
        /// Click stream whose ON/OFF rates give the efficiency.
        #[arg(long, requires = "schedule")]
        stream: Option<PathBuf>,
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Efficiency from a known click-rate excess [1/s] instead of a stream.
        #[arg(long, conflicts_with = "stream")]
        excess_rate: Option<f64>,
        #[arg(long, requires = "excess_rate", default_value_t = 0.0)]
        excess_rate_err: f64,
    },
    /// Allan variance of the cavity, sideband and difference rates.
    Allan {
        #[arg(long)]
        stream: Option<PathBuf>,
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Longest averaging time [s] (default: from the config).
        #[arg(long)]
        max_tau_s: Option<f64>,
    },
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }

    pub fn mismatch(message: impl Into<String>) -> Self {
        Self::new(3, message)
    }

    pub fn empty(message: impl Into<String>) -> Self {
        Self::new(4, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig { .. } => 2,
            Error::Mismatch(_) => 3,
            Error::Empty(_) | Error::InsufficientData(_) => 4,
            _ => 1,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(1, e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
