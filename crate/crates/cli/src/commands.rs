use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use haloscope_core::analysis::{
    allan_variance, click_step, estimate_bias, exclusion_curve, log_spaced_taus, window_rates, write_exclusion,
    AllanPoint, AllanTables, CountWindow, RunSummary, WindowBinner,
};
use haloscope_core::constants::photon_energy;
use haloscope_core::physics::{axion_signal_power, measurement_time, speedup, DetectionMode, HaloscopeConfig};
use haloscope_core::protocol::{read_schedule, write_schedule, ProtocolSchedule};
use haloscope_core::qubit::{
    fit_dispersive, input_photon_flux, input_photon_flux_with_error, operational_efficiency, read_observations,
    write_calibration_report, CalibrationReport, Measured,
};
use haloscope_core::smpd::{for_each_click, generate_clicks_into, ClickWriter, NullSink, StreamFormat};
use haloscope_core::{Phase, Provenance, RunConfig};

use crate::{Cli, Command, Failure, GlobalArgs};

type Outcome<T = ()> = Result<T, Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let cfg = load_config(&cli.global)?;
    match &cli.command {
        Command::Simulate { super_cycles } => simulate(cfg, *super_cycles),
        Command::Analyze { stream, schedule } => analyze(&cfg, stream.as_deref(), schedule.as_deref()),
        Command::Plan { span_hz, g_gamma, snr } => plan(&cfg, *span_hz, *g_gamma, *snr),
        Command::Calibrate {
            observations,
            stream,
            schedule,
            excess_rate,
            excess_rate_err,
        } => calibrate(
            &cfg,
            observations,
            stream.as_deref(),
            schedule.as_deref(),
            excess_rate.map(|r| Measured::new(r, *excess_rate_err)),
        ),
        Command::Allan {
            stream,
            schedule,
            max_tau_s,
        } => allan(&cfg, stream.as_deref(), schedule.as_deref(), *max_tau_s),
    }
}

fn load_config(args: &GlobalArgs) -> Outcome<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml_str(&text).map_err(|e| match e {
                haloscope_core::Error::Format { line, reason } => {
                    Failure::config(format!("{}:{line}: {reason}", path.display()))
                }
                other => Failure::config(format!("{}: {other}", path.display())),
            })?
        }
        None => RunConfig::preset(&args.preset).map_err(|e| Failure::config(e.to_string()))?,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn output_dir(cfg: &RunConfig) -> Outcome<&Path> {
    let dir = cfg.output.dir.as_path();
    if !dir.is_dir() {
        return Err(Failure::config(format!("output directory {} does not exist", dir.display())));
    }
    Ok(dir)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomically<F>(path: &Path, f: F) -> Outcome
where
    F: FnOnce(&mut BufWriter<&mut tempfile::NamedTempFile>) -> Outcome,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(&mut tmp);
        f(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Failure::from(e.error))?;
    Ok(())
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::new(1, format!("cannot open {}: {e}", path.display())))
}

fn simulate(mut cfg: RunConfig, super_cycles: Option<u64>) -> Outcome {
    if super_cycles.is_some() {
        cfg.super_cycles = super_cycles;
        cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    }
    let dir = output_dir(&cfg)?.to_path_buf();
    let schedule = cfg.schedule()?;
    let provenance = Provenance {
        digest: cfg.digest(),
        seed: cfg.seed,
    };
    let truth = cfg.seeded_truth();
    write_atomically(&dir.join(&cfg.output.schedule), |w| {
        write_schedule(w, &schedule, &provenance)?;
        Ok(())
    })?;
    let count = generate_clicks_into(&schedule, &cfg.smpd, &truth, &mut NullSink)?;
    let format = if cfg.output.binary_stream {
        StreamFormat::Binary
    } else {
        StreamFormat::Text
    };
    let mut summary = None;
    write_atomically(&dir.join(&cfg.output.stream), |w| {
        let mut writer = ClickWriter::new(w, format, &provenance, count.clicks)?;
        summary = Some(generate_clicks_into(&schedule, &cfg.smpd, &truth, &mut writer)?);
        writer.finish()?;
        Ok(())
    })?;
    let summary = summary.expect("stream written");
    let acc = schedule.accounting();
    let n = schedule.n_super_cycles() as f64;
    println!(
        "simulated {} super-cycles ({:.1} s): {} clicks ({} dark); live label-0 {:.3} s, sidebands {:.3} s, ON {:.3} s",
        schedule.n_super_cycles(),
        summary.wall_s,
        summary.clicks,
        summary.dark_clicks,
        acc.on_resonance_s * n,
        acc.sideband_s * n,
        summary.live_on_s
    );
    Ok(())
}

struct Loaded {
    windows: Vec<CountWindow>,
    provenance: Provenance,
    dark_clicks: u64,
}

fn load_windows(cfg: &RunConfig, stream: Option<&Path>, schedule: Option<&Path>) -> Outcome<Loaded> {
    let dir = &cfg.output.dir;
    let schedule_path = schedule.map_or_else(|| dir.join(&cfg.output.schedule), PathBuf::from);
    let stream_path = stream.map_or_else(|| dir.join(&cfg.output.stream), PathBuf::from);
    let (sched, header): (ProtocolSchedule, _) = read_schedule(&mut open(&schedule_path)?)?;
    let mut binner = WindowBinner::new(&sched);
    let mut dark = 0u64;
    let provenance = for_each_click(&mut open(&stream_path)?, |c| {
        let step = click_step(&sched, c)?;
        binner.add(c, step);
        if c.phase == Phase::Off {
            dark += 1;
        }
        Ok(())
    })?;
    if provenance != header.provenance {
        return Err(Failure::mismatch(format!(
            "stream {} (digest {}, seed {}) was not produced with schedule {} (digest {}, seed {})",
            stream_path.display(),
            provenance.digest,
            provenance.seed,
            schedule_path.display(),
            header.provenance.digest,
            header.provenance.seed
        )));
    }
    if dark == 0 {
        return Err(Failure::empty("no detect-phase clicks"));
    }
    let windows = binner.finish().into_iter().filter(|w| w.live_c_s > 0.0).collect();
    Ok(Loaded {
        windows,
        provenance,
        dark_clicks: dark,
    })
}

/// Allan tables on the per-step rates, at multiples of the mean step spacing
/// that leave at least three bins.
fn allan_tables(windows: &[CountWindow], max_tau_s: f64, per_decade: usize) -> Option<AllanTables> {
    if windows.len() < 3 {
        return None;
    }
    let base = (windows[windows.len() - 1].start_s - windows[0].start_s) / (windows.len() - 1) as f64;
    let taus: Vec<f64> = log_spaced_taus(base, max_tau_s, per_decade)
        .into_iter()
        .filter(|t| windows.len() / (t / base).round() as usize >= 3)
        .collect();
    if taus.is_empty() {
        return None;
    }
    let (c, b, d) = window_rates(windows);
    Some(AllanTables {
        cavity: allan_variance(&c, base, &taus).ok()?,
        sidebands: allan_variance(&b, base, &taus).ok()?,
        difference: allan_variance(&d, base, &taus).ok()?,
    })
}

fn analyze(cfg: &RunConfig, stream: Option<&Path>, schedule: Option<&Path>) -> Outcome {
    let dir = output_dir(cfg)?.to_path_buf();
    let loaded = load_windows(cfg, stream, schedule)?;
    let ws = &loaded.windows;
    let bias = estimate_bias(ws).map_err(|e| Failure::empty(e.to_string()))?;
    let report = exclusion_curve(ws, &cfg.haloscope, &cfg.detector, &cfg.analysis.limits)?;
    let allan = allan_tables(ws, cfg.analysis.allan_max_tau_s, cfg.analysis.allan_per_decade);
    if allan.is_none() {
        log::warn!("run too short for an Allan table");
    }
    let live_on: f64 = ws.iter().map(|w| w.live_on_s).sum();
    let n_on: u64 = ws.iter().map(|w| w.n_on).sum();
    let summary = RunSummary {
        digest: loaded.provenance.digest.clone(),
        seed: loaded.provenance.seed,
        windows: ws.len(),
        dark_clicks: loaded.dark_clicks,
        live_dark_s: ws.iter().map(|w| w.live_c_s + w.live_b_s).sum(),
        bias,
        k_b_used: report.k_b,
        scan_speed_mhz_per_day: report.scan_speed_mhz_per_day,
        discoveries: report.discoveries().map(|p| p.nu_hz).collect(),
        on_rate_per_s: if live_on > 0.0 { n_on as f64 / live_on } else { 0.0 },
        allan,
    };
    write_atomically(&dir.join(&cfg.output.exclusion), |w| {
        write_exclusion(w, &report, &loaded.provenance)?;
        Ok(())
    })?;
    write_atomically(&dir.join(&cfg.output.summary), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(|e| Failure::new(1, e.to_string()))?;
        writeln!(w)?;
        Ok(())
    })?;
    let best = report
        .points
        .iter()
        .map(|p| p.g_limit_gev_inv)
        .fold(f64::INFINITY, f64::min);
    println!(
        "{} windows, {} dark clicks; k_b = {:.4} +- {:.4} (limits use {}); {} bins, best g < {:.3e} /GeV; scan speed {:.2} MHz/day",
        ws.len(),
        loaded.dark_clicks,
        bias.k_b,
        bias.sigma,
        report.k_b,
        report.points.len(),
        best,
        report.scan_speed_mhz_per_day
    );
    for p in report.discoveries() {
        println!("DISCOVERY candidate at {:.1} Hz: S = {:.2}", p.nu_hz, p.significance);
    }
    Ok(())
}

fn plan(cfg: &RunConfig, span_hz: Option<f64>, g_gamma: Option<f64>, snr: f64) -> Outcome {
    let span = span_hz.unwrap_or(cfg.plan.span_hz);
    if span.is_nan() || span < 0.0 {
        return Err(Failure::config("span must be non-negative"));
    }
    let h = HaloscopeConfig {
        g_gamma: g_gamma.unwrap_or(cfg.haloscope.g_gamma),
        ..cfg.haloscope.clone()
    };
    let det = &cfg.detector;
    let p_a = axion_signal_power(&h)?;
    let p_2t = axion_signal_power(&HaloscopeConfig {
        b0_tesla: 2.0,
        ..h.clone()
    })?;
    let linewidth = h.cavity_linewidth();
    let r = speedup(det, linewidth);
    let dt_m = cfg.analysis.limits.dt_m_s;
    let raw_speed = linewidth / dt_m * 86_400.0 / 1e6;
    println!("signal power: {p_a:.4e} W ({:.4} photons/s)", p_a / photon_energy(h.nu_c_hz));
    println!("power vs 2 T: {:.2}", p_a / p_2t);
    println!("cavity linewidth: {linewidth:.1} Hz");
    println!("speedup R: {:.2} (thermal limit {:.3e})", r.r, r.r_thermal);
    println!("raw scan speed: {raw_speed:.3} MHz/day ({linewidth:.0} Hz per {dt_m} s)");
    if span == 0.0 {
        println!("empty plan: zero span");
        return Ok(());
    }
    let t_bin = measurement_time(DetectionMode::Counter, p_a, h.nu_c_hz, snr, det)?;
    let t_sql = measurement_time(DetectionMode::Sql, p_a, h.nu_c_hz, snr, det)?;
    let bins = (span / linewidth).ceil();
    println!("linewidths to cover: {bins}");
    println!(
        "counter: {t_bin:.4e} s per linewidth, {:.4} MHz/day, {:.4e} s to cover {span} Hz",
        linewidth / t_bin * 86_400.0 / 1e6,
        bins * t_bin
    );
    println!(
        "quantum limited amplifier: {t_sql:.4e} s per linewidth, {:.4e} s to cover",
        bins * t_sql
    );
    println!("raw time to cover: {:.4e} s", bins * dt_m);
    Ok(())
}

fn calibrate(
    cfg: &RunConfig,
    observations: &Path,
    stream: Option<&Path>,
    schedule: Option<&Path>,
    excess: Option<Measured>,
) -> Outcome {
    let dir = output_dir(cfg)?.to_path_buf();
    let obs = read_observations(&mut open(observations)?)?;
    let fit = fit_dispersive(&obs, &cfg.calibration)?;
    let flux = input_photon_flux(&fit.params)?;
    let flux_m = input_photon_flux_with_error(&fit)?;
    let efficiency = if let Some(ex) = excess {
        Some(operational_efficiency(ex, Measured::exact(0.0), flux_m)?)
    } else if stream.is_some() {
        let loaded = load_windows(cfg, stream, schedule)?;
        let ws = &loaded.windows;
        let (n_on, t_on) = ws.iter().fold((0u64, 0.0), |a, w| (a.0 + w.n_on, a.1 + w.live_on_s));
        let (n_off, t_off) = ws.iter().fold((0u64, 0.0), |a, w| (a.0 + w.n_c, a.1 + w.live_c_s));
        if t_on <= 0.0 || t_off <= 0.0 {
            return Err(Failure::empty("stream has no ON or OFF live time"));
        }
        let on = Measured::new(n_on as f64 / t_on, (n_on as f64).sqrt() / t_on);
        let off = Measured::new(n_off as f64 / t_off, (n_off as f64).sqrt() / t_off);
        Some(operational_efficiency(on, off, flux_m)?)
    } else {
        None
    };
    let p = &fit.params;
    let report = CalibrationReport {
        reduced_chi2: fit.chi2 / fit.dof.max(1) as f64,
        fit: fit.clone(),
        flux,
        flux_sigma_per_s: flux_m.sigma,
        efficiency,
    };
    write_atomically(&dir.join("calibration.json"), |w| {
        write_calibration_report(w, &report)?;
        Ok(())
    })?;
    println!(
        "kappa = {:.4} +- {:.4} MHz, chi = {:.4} +- {:.4} MHz, eps = {:.3} +- {:.3} kHz, chi2/dof = {:.3}",
        p.kappa_hz / 1e6,
        fit.sigma_kappa_hz / 1e6,
        p.chi_hz / 1e6,
        fit.sigma_chi_hz / 1e6,
        p.epsilon_hz / 1e3,
        fit.sigma_epsilon_hz / 1e3,
        report.reduced_chi2
    );
    println!(
        "input flux = {:.0} +- {:.0} photons/s ({:.4e} W)",
        flux.flux_per_s, flux_m.sigma, flux.power_w
    );
    if let Some(e) = efficiency {
        println!("efficiency = {:.4} +- {:.4}", e.value, e.sigma);
    }
    Ok(())
}

fn allan(cfg: &RunConfig, stream: Option<&Path>, schedule: Option<&Path>, max_tau_s: Option<f64>) -> Outcome {
    let loaded = load_windows(cfg, stream, schedule)?;
    let max_tau = max_tau_s.unwrap_or(cfg.analysis.allan_max_tau_s);
    let tables = allan_tables(&loaded.windows, max_tau, cfg.analysis.allan_per_decade)
        .ok_or_else(|| Failure::empty("run too short for an Allan table"))?;
    println!("tau_s,var_c,var_b,var_diff,bins");
    let rows = tables
        .cavity
        .iter()
        .zip(&tables.sidebands)
        .zip(&tables.difference);
    for ((c, b), d) in rows {
        let AllanPoint { tau_s, bins, .. } = *c;
        println!("{tau_s:.3},{:.6e},{:.6e},{:.6e},{bins}", c.variance, b.variance, d.variance);
    }
    Ok(())
}
