//! End-to-end checks of the command-line interface.

use std::fs;
use std::path::Path;
use std::process::Command;

fn hystab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hystab"))
}

#[test]
fn help_exits_zero_and_lists_commands() {
    let out = hystab().arg("--help").output().expect("spawn");
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["simulate", "analyze", "sweep", "energy-audit"] {
        assert!(text.contains(cmd), "--help missing {cmd}");
    }
    for flag in ["--out", "--seed", "--dt", "--t-end", "--format"] {
        assert!(text.contains(flag), "--help missing {flag}");
    }
}

#[test]
fn empty_config_exits_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("empty.json");
    fs::write(&cfg, "").unwrap();
    let out = hystab()
        .args(["--out"])
        .arg(dir.path())
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_sweep_range_exits_four() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = hystab()
        .args(["--out"])
        .arg(dir.path())
        .args([
            "sweep", "--preset", "oscillator", "--param", "k", "--from", "105", "--to", "95",
            "--steps", "5",
        ])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_flag_exits_four() {
    let out = hystab().arg("--bogus").output().expect("spawn");
    assert_eq!(out.status.code(), Some(4));
}

fn run_simulate(dir: &Path) {
    let out = hystab()
        .args(["--out"])
        .arg(dir)
        .args(["--t-end", "5", "simulate", "--preset", "second_order"])
        .output()
        .expect("spawn");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_expected_files() {
    let dir = tempfile::tempdir().expect("tempdir");
    run_simulate(dir.path());
    for f in ["trajectory.csv", "diagnostics.json", "phase.svg", "loop.svg", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(diag["bounded"], serde_json::Value::Bool(true));
    let header = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,x1,x2,y,xi,u,V,dissipated"));
}

#[test]
fn reruns_reproduce_byte_identical_csv() {
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    run_simulate(a.path());
    run_simulate(b.path());
    let csv_a = fs::read(a.path().join("trajectory.csv")).unwrap();
    let csv_b = fs::read(b.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    // manifests agree on the scenario hash even if wall clock differs
    let ma: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["scenario_sha256"], mb["scenario_sha256"]);
}

#[test]
fn unstable_open_loop_reports_unbounded() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = hystab()
        .args(["--out"])
        .arg(dir.path())
        .args([
            "--dt", "1e-3", "simulate", "--preset", "oscillator", "--K", "101", "--feedback",
            "none", "--no-svg",
        ])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(diag["bounded"], serde_json::Value::Bool(false));
}

#[test]
fn k_sweep_crosses_zero_between_99_and_101() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = hystab()
        .args(["--out"])
        .arg(dir.path())
        .args([
            "--dt", "1e-2", "--t-end", "5", "sweep", "--preset", "oscillator", "--feedback",
            "none", "--param", "k", "--from", "95", "--to", "105", "--steps", "11",
        ])
        .output()
        .expect("spawn");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let max_re: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[0].parse().unwrap(), cols[1].parse().unwrap())
        })
        .collect();
    let at = |k: f64| max_re.iter().find(|(v, _)| (*v - k).abs() < 1e-9).unwrap().1;
    assert!(at(99.0) < 0.0);
    assert!(at(101.0) > 0.0);
}

#[test]
fn analyze_reports_touching_second_order() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = hystab()
        .args(["--out"])
        .arg(dir.path())
        .args(["analyze", "--preset", "second_order", "--no-svg"])
        .output()
        .expect("spawn");
    assert!(out.status.success());
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analysis.json")).unwrap())
            .unwrap();
    assert_eq!(rep["overall"], "bounded_output");
    assert_eq!(rep["phi_h"]["status"], "touching");
}

#[test]
fn energy_audit_books_nonnegative_dissipation() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = hystab()
        .args(["--out"])
        .arg(dir.path())
        .args(["--t-end", "5", "energy-audit", "--preset", "double_integrator"])
        .output()
        .expect("spawn");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("audit.json")).unwrap()).unwrap();
    assert_eq!(rep["dissipative"], serde_json::Value::Bool(true));
    assert!(rep["dissipated"].as_f64().unwrap() >= 0.0);
    assert!(dir.path().join("energy.csv").exists());
}
