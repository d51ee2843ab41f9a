use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use magsqueeze_cli::config::parse_config;
use serde_json::Value;

fn cfg(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magsqueeze"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn write_variant(dir: &Path, base: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(cfg(base)).unwrap();
    assert!(text.contains(from));
    let path = dir.join("variant.cfg");
    fs::write(&path, text.replace(from, to)).unwrap();
    path
}

#[test]
fn spectrum_csv_layout_and_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["spectrum", "--phi", "0.3"], &cfg("fig2.cfg"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&dir.path().join("spectrum.csv"));
    assert_eq!(header, ["omega_over_omega_b", "phi_over_pi", "S", "S_dB"]);
    assert_eq!(rows.len(), 201);
    let min = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
    assert!((min - 0.15).abs() < 0.02, "{min}");
    let r = report(dir.path());
    assert_eq!(r["files"][0]["path"], "spectrum.csv");
    assert_eq!(r["files"][0]["rows"], 201);
    assert_eq!(r["files"][0]["columns"], 4);
    assert_eq!(r["stability"]["verdict"], "stable");
    assert!(r["validity"]["kerr_ratio"].as_f64().unwrap() < 0.2);
}

#[test]
fn spectrum_rows_are_omega_major() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["spectrum", "--grid", "3"], &cfg("fig2.cfg"), dir.path());
    assert!(out.status.success());
    let (_, rows) = csv(&dir.path().join("spectrum.csv"));
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(keys.len(), 9);
    assert_eq!(keys[0].0, keys[1].0);
    assert_eq!(keys[0].0, keys[2].0);
    assert_ne!(keys[0].0, keys[3].0);
    assert_eq!(keys[0].1, keys[3].1);
    for r in &rows {
        assert_eq!(r[2].split('e').next().unwrap().replace(['.', '-'], "").len(), 12);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(run(&["sweep", "--grid", "41x21"], &cfg("fig2.cfg"), d.path()).status.success());
    }
    assert_eq!(
        fs::read(a.path().join("sweep.csv")).unwrap(),
        fs::read(b.path().join("sweep.csv")).unwrap()
    );
}

#[test]
fn vacuum_spectrum_is_exactly_half() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["spectrum"], &cfg("vacuum.cfg"), dir.path()).status.success());
    let (_, rows) = csv(&dir.path().join("spectrum.csv"));
    assert!(rows.iter().all(|r| r[2] == "5.00000000000e-1"));
}

#[test]
fn one_by_n_sweep_matches_spectrum_shape() {
    let s = tempfile::tempdir().unwrap();
    let w = tempfile::tempdir().unwrap();
    assert!(run(&["spectrum", "--phi", "0.3", "--grid", "51"], &cfg("fig2.cfg"), s.path()).status.success());
    let sweep_cfg = write_variant(w.path(), "fig2.cfg", "phi_min_over_pi = 0.0", "phi_min_over_pi = 0.3");
    assert!(run(&["sweep", "--grid", "51x1"], &sweep_cfg, w.path()).status.success());
    let (_, spec) = csv(&s.path().join("spectrum.csv"));
    let (header, sweep) = csv(&w.path().join("sweep.csv"));
    assert_eq!(&header[..4], ["omega_over_omega_b", "phi_over_pi", "S", "S_dB"]);
    assert_eq!(spec.len(), sweep.len());
    for (a, b) in spec.iter().zip(&sweep) {
        assert_eq!(a[..], b[..4]);
    }
}

#[test]
fn above_vacuum_flag_is_definitional() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["sweep", "--grid", "31x31"], &cfg("fig2.cfg"), dir.path()).status.success());
    let (header, rows) = csv(&dir.path().join("sweep.csv"));
    assert_eq!(header[4], "above_vacuum");
    let mut seen = [false; 2];
    for r in rows {
        let above = r[2].parse::<f64>().unwrap() > 0.5;
        assert_eq!(r[4], above.to_string());
        seen[above as usize] = true;
    }
    assert_eq!(seen, [true, true]);
    assert!(dir.path().join("sweep_plot.py").exists());
}

#[test]
fn sweep_minimum_near_reference_point() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["sweep"], &cfg("fig2.cfg"), dir.path()).status.success());
    let h = &report(dir.path())["headline"];
    assert!((h["omega_over_omega_b"].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert!((h["phi_over_pi"].as_f64().unwrap() - 0.3).abs() < 0.05);
}

#[test]
fn family_sweeps_write_one_curve_per_member() {
    for (name, members) in [("fig3b.cfg", 3), ("fig4a.cfg", 3), ("fig4b.cfg", 3)] {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&["sweep", "--grid", "21"], &cfg(name), dir.path());
        assert!(out.status.success(), "{name}");
        let (header, rows) = csv(&dir.path().join("sweep.csv"));
        assert_eq!(header.last().unwrap(), "stable");
        assert_eq!(rows.len(), 21 * members, "{name}");
    }
}

#[test]
fn detuning_sweep_flags_unstable_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["sweep", "--grid", "21x61"], &cfg("fig3a.cfg"), dir.path()).status.success());
    let (header, rows) = csv(&dir.path().join("sweep.csv"));
    assert_eq!(header[0], "delta_a_over_omega_b");
    assert_eq!(rows.len(), 21 * 61);
    for r in &rows {
        assert_eq!(r[3].is_empty(), r[6] == "false");
    }
    let d = report(dir.path())["details"]["optimum_delta_a_over_omega_b"].as_f64().unwrap();
    assert!(d.abs() < 1.0);
}

#[test]
fn unstable_config_exits_3_with_dump() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_variant(dir.path(), "fig2.cfg", "drive_power_mw = 100", "drive_power_mw = 1000");
    let out_dir = dir.path().join("out");
    let out = run(&["spectrum"], &c, &out_dir);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("λ/ω_b"));
    let s: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("stability.json")).unwrap()).unwrap();
    assert_eq!(s["verdict"], "unstable");
    assert_eq!(s["eigenvalues_over_omega_b"].as_array().unwrap().len(), 6);
    assert!(!out_dir.join("spectrum.csv").exists());
}

#[test]
fn stability_always_reports() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_variant(dir.path(), "fig2.cfg", "drive_power_mw = 100", "drive_power_mw = 1000");
    let out = run(&["stability"], &c, &dir.path().join("u"));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&dir.path().join("u"))["stability"]["verdict"], "unstable");

    let out = run(&["stability"], &cfg("vacuum.cfg"), &dir.path().join("v"));
    assert_eq!(out.status.code(), Some(0));
    let s = &report(&dir.path().join("v"))["stability"];
    assert_eq!(s["verdict"], "stable");
    let gamma_half = std::f64::consts::TAU * 100.0 / 2.0 / (std::f64::consts::TAU * 10e6);
    assert!((s["margin_over_omega_b"].as_f64().unwrap() - gamma_half).abs() < 1e-12);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.cfg");
    fs::write(&empty, "").unwrap();
    let out = run(&["params"], &empty, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));

    let c = write_variant(dir.path(), "fig2.cfg", "gamma_hz", "gamma_hertz");
    let out = run(&["params"], &c, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma_hertz"));

    let c = write_variant(dir.path(), "fig2.cfg", "drive_power_mw = 100", "drive_power_mw = 100\nG_direct_hz = 1e6");
    let out = run(&["params"], &c, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("drive_power_mw") && err.contains("G_direct"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_magsqueeze")).arg("params").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threshold_without_crossing_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_variant(dir.path(), "fig2.cfg", "power_max_mw = 2000", "power_max_mw = 200");
    let out = run(&["threshold"], &c, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn params_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["params"], &cfg("fig2.cfg"), dir.path());
    assert!(out.status.success());
    let p: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("params.json")).unwrap()).unwrap();
    assert!((p["delta_m_effective_over_omega_b"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert!((p["kappa_a_over_omega_b"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((p["kappa_1_over_omega_b"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    let r = report(dir.path());
    let echoed = parse_config(r["config"].as_str().unwrap()).unwrap();
    let original = parse_config(&fs::read_to_string(cfg("fig2.cfg")).unwrap()).unwrap();
    assert_eq!(echoed, original);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn verify_passes_and_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["verify", "--seed", "7"], &cfg("vacuum.cfg"), d.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    let va: Value = serde_json::from_str(&fs::read_to_string(a.path().join("verify.json")).unwrap()).unwrap();
    let vb: Value = serde_json::from_str(&fs::read_to_string(b.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(va, vb);
    assert_eq!(va["seed"], 7);
}

#[test]
fn optimize_phase_modes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["optimize-phase"], &cfg("fig2.cfg"), &dir.path().join("p")).status.success());
    assert!(run(&["optimize-phase", "--global-phi"], &cfg("fig2.cfg"), &dir.path().join("g")).status.success());
    let (_, per) = csv(&dir.path().join("p/optimal_phase.csv"));
    let (_, global) = csv(&dir.path().join("g/optimal_phase.csv"));
    assert!(global.iter().all(|r| r[1] == global[0][1]));
    for (p, g) in per.iter().zip(&global) {
        assert!(p[2].parse::<f64>().unwrap() <= g[2].parse::<f64>().unwrap() + 1e-12);
    }
}
