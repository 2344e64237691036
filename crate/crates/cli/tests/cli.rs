use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use haloscope_core::qubit::{stark_dephasing_model, write_observations};
use haloscope_core::smpd::{ClickWriter, StreamFormat};
use haloscope_core::protocol::read_schedule;
use haloscope_core::{DispersiveParams, RamseyObservation};

fn haloscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haloscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn dir_arg(d: &Path) -> &str {
    d.to_str().unwrap()
}

/// Value following `key` in a line of output, up to the next space or comma.
fn number_after(text: &str, key: &str) -> f64 {
    let rest = &text[text.find(key).unwrap_or_else(|| panic!("`{key}` missing in {text}")) + key.len()..];
    let token: String = rest
        .trim_start()
        .chars()
        .take_while(|c| !c.is_whitespace() && *c != ',' && *c != '(')
        .collect();
    token.parse().unwrap_or_else(|e| panic!("{token}: {e}"))
}

fn simulate(dir: &Path, seed: u64, extra: &[&str]) -> String {
    let seed = seed.to_string();
    let mut args = vec!["--out", dir_arg(dir), "--seed", &seed];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["simulate", "--super-cycles", "1"]);
    ok(&haloscope(&args))
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), 11, &[]);
    simulate(b.path(), 11, &[]);
    for name in ["clicks.txt", "schedule.txt"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between identical runs");
    }
}

#[test]
fn one_super_cycle_reports_label0_live_time() {
    let d = tempfile::tempdir().unwrap();
    let line = simulate(d.path(), 1, &[]);
    let live = number_after(&line, "live label-0");
    assert!((live - 285.0).abs() / 285.0 < 0.02, "{line}");
    assert!(number_after(&line, "super-cycles (") > 0.0);
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let gone = d.path().join("absent");
    let out = haloscope(&["--out", dir_arg(&gone), "simulate", "--super-cycles", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_config_names_the_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "seed = 1\n\n[smpd]\neta = 0.5\n").unwrap();
    let out = haloscope(&["--config", dir_arg(&cfg), "--out", dir_arg(d.path()), "plan"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.toml:4:"), "{err}");

    fs::write(&cfg, "[plan]\nspeed_hz_per_hour = 5e4\n").unwrap();
    let out = haloscope(&["--config", dir_arg(&cfg), "plan"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("plan.speed_hz_per_hour"));
}

#[test]
fn analyze_refuses_mixed_inputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), 1, &[]);
    simulate(b.path(), 2, &[]);
    let stream = a.path().join("clicks.txt");
    let schedule = b.path().join("schedule.txt");
    let out = haloscope(&[
        "--out",
        dir_arg(a.path()),
        "analyze",
        "--stream",
        dir_arg(&stream),
        "--schedule",
        dir_arg(&schedule),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_stream_is_degenerate() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), 3, &[]);
    let (_, header) = read_schedule(&mut fs::read(d.path().join("schedule.txt")).unwrap().as_slice()).unwrap();
    let file = fs::File::create(d.path().join("clicks.txt")).unwrap();
    ClickWriter::new(file, StreamFormat::Text, &header.provenance, 0)
        .unwrap()
        .finish()
        .unwrap();
    let out = haloscope(&["--out", dir_arg(d.path()), "analyze"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no detect-phase clicks"));
}

#[test]
fn background_only_run_has_limits_and_no_discovery() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), 4, &[]);
    let line = ok(&haloscope(&["--out", dir_arg(d.path()), "analyze"]));
    assert!(!line.contains("DISCOVERY"), "{line}");
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(d.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["discoveries"].as_array().unwrap().len(), 0);
    assert!(summary["bias"]["k_b"].as_f64().is_some());
    let exclusion = fs::read_to_string(d.path().join("exclusion.txt")).unwrap();
    assert!(exclusion.starts_with("# haloscope-exclusion v1"));
    let rows = exclusion.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count();
    assert!(rows >= 1);
}

#[test]
fn injected_signal_is_discovered() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("signal.toml");
    // About ten times the one-super-cycle limit rate of ~4 photons/s.
    fs::write(&cfg, "[truth]\nsignal_rate_per_s = 40.0\n").unwrap();
    simulate(d.path(), 5, &["--config", dir_arg(&cfg)]);
    let line = ok(&haloscope(&["--config", dir_arg(&cfg), "--out", dir_arg(d.path()), "analyze"]));
    assert!(line.contains("DISCOVERY"), "{line}");
    let s = number_after(&line, "S =");
    assert!(s >= 5.0, "{line}");
}

#[test]
fn plan_reports_speedup_and_field_scaling() {
    let out = ok(&haloscope(&["plan"]));
    let r = number_after(&out, "speedup R:");
    assert!((18.0..=20.0).contains(&r), "{out}");
    assert!(out.contains("to cover"));

    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("12t.toml");
    fs::write(&cfg, "[haloscope]\nb0_tesla = 12.0\n").unwrap();
    let out = ok(&haloscope(&["--config", dir_arg(&cfg), "plan"]));
    assert!((number_after(&out, "power vs 2 T:") - 36.0).abs() < 1e-9, "{out}");

    let out = ok(&haloscope(&["plan", "--span-hz", "0"]));
    assert!(out.contains("empty plan"), "{out}");
}

fn observation_table(dir: &Path) -> std::path::PathBuf {
    let p = DispersiveParams::paper2024();
    let sigma = 200.0;
    let obs: Vec<RamseyObservation> = (-40..=40)
        .map(|i| {
            let delta = i as f64 * 0.1e6;
            let m = stark_dephasing_model(delta, &p);
            RamseyObservation {
                delta_hz: delta,
                delta_omega_hz: m.delta_omega_hz,
                delta_gamma_hz: m.delta_gamma_hz,
                sigma_omega_hz: sigma,
                sigma_gamma_hz: sigma,
            }
        })
        .collect();
    let path = dir.join("ramsey.csv");
    let mut buf = Vec::new();
    write_observations(&mut buf, &obs).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

#[test]
fn calibrate_from_excess_rate() {
    let d = tempfile::tempdir().unwrap();
    let table = observation_table(d.path());
    let out = ok(&haloscope(&[
        "--out",
        dir_arg(d.path()),
        "calibrate",
        "--observations",
        dir_arg(&table),
        "--excess-rate",
        "9233",
    ]));
    let flux = number_after(&out, "input flux =");
    assert!((flux - 20_100.0).abs() < 200.0, "{out}");
    let eta = number_after(&out, "efficiency =");
    assert!((eta - 9233.0 / flux).abs() < 1e-3, "{out}");
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(d.path().join("calibration.json")).unwrap()).unwrap();
    assert!(report["efficiency"]["value"].as_f64().is_some());
}

#[test]
fn calibrate_from_stream_and_allan_table() {
    let d = tempfile::tempdir().unwrap();
    simulate(d.path(), 6, &[]);
    let table = observation_table(d.path());
    let stream = d.path().join("clicks.txt");
    let schedule = d.path().join("schedule.txt");
    let out = ok(&haloscope(&[
        "--out",
        dir_arg(d.path()),
        "calibrate",
        "--observations",
        dir_arg(&table),
        "--stream",
        dir_arg(&stream),
        "--schedule",
        dir_arg(&schedule),
    ]));
    let eta = number_after(&out, "efficiency =");
    assert!(eta > 0.3 && eta < 0.6, "{out}");

    let table = ok(&haloscope(&["--out", dir_arg(d.path()), "allan"]));
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("tau_s,var_c,var_b,var_diff,bins"));
    assert!(lines.count() >= 2, "{table}");
}
