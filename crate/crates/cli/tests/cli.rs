use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_smallgain"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SMALLGAIN_THREADS", "2")
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn run_config(cmd: &str, name: &str, out: &Path) -> i32 {
    run(&[cmd, "--config", config(name).to_str().unwrap()], out)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("simulate", "simulate-scalar-sampled.json", dir.path()), 0);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x_1,y_1,event"));
    let row = lines.find(|l| l.split(',').next().unwrap().parse::<f64>().unwrap() == 0.5).unwrap();
    let x: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((x - 1.0).abs() < 1e-12);
    assert!(!csv.contains('\r'));

    let manifest = json(dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["config"]["x0"][0], 2.0);
    let text = serde_json::to_string(&manifest).unwrap();
    assert!(!text.contains(dir.path().to_str().unwrap()));
}

#[test]
fn manifest_replays_bit_exactly() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--config", config("simulate-planar.json").to_str().unwrap(), "--seed", "9"], first.path()), 0);
    let manifest = first.path().join("manifest.json");
    assert_eq!(run(&["simulate", "--config", manifest.to_str().unwrap()], second.path()), 0);
    for name in ["trajectory.csv", "trajectory.json", "manifest.json"] {
        assert_eq!(fs::read(first.path().join(name)).unwrap(), fs::read(second.path().join(name)).unwrap(), "{name}");
    }
    // a different seed changes the disturbance
    let third = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--config", manifest.to_str().unwrap(), "--seed", "10"], third.path()), 0);
    assert_ne!(fs::read(first.path().join("trajectory.csv")).unwrap(), fs::read(third.path().join("trajectory.csv")).unwrap());
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--config", "/nonexistent/config.json"], dir.path()), 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"system\": {\"kind\": \"nope\"}}").unwrap();
    assert_eq!(run(&["simulate", "--config", bad.to_str().unwrap()], dir.path()), 1);
    fs::write(&bad, "{\"check\": \"h3\", \"gamma1\": {\"kind\": \"power\"}}").unwrap();
    assert_eq!(run(&["check", "--config", bad.to_str().unwrap()], dir.path()), 1);
    assert_eq!(run(&["simulate"], dir.path()), 1);
    assert_eq!(run(&["reproduce", "example-9.9"], dir.path()), 1);
    assert_eq!(run(&["check", "--config", config("check-linear.json").to_str().unwrap(), "--grid", "t=bogus"], dir.path()), 1);
}

#[test]
fn blowup_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("simulate", "simulate-blowup.json", dir.path()), 2);
    let traj = json(dir.path().join("trajectory.json"));
    assert_eq!(traj["status"]["kind"], "blowup");
    let t = traj["status"]["t"].as_f64().unwrap();
    assert!(t > 0.09 && t < 0.105, "{t}");
}

#[test]
fn design_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("design", "design-planar.json", dir.path()), 0);
    let design = json(dir.path().join("design.json"));
    let r = design["design"]["r"].as_f64().unwrap();
    assert!((r - 1.0 / 7.0).abs() <= 1e-12);
    assert_eq!(design["stability"], "UISS");

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("design", "design-small-gain-fails.json", dir.path()), 3);
    assert!(!dir.path().join("design.json").exists());
    let cert = json(dir.path().join("certificate.json"));
    assert_eq!(cert["verdict"], "fail");
    assert!(cert["witness"]["s"].as_f64().is_some());

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("design", "design-uncontrollable.json", dir.path()), 4);
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("check", "check-linear.json", dir.path()), 0);
    assert_eq!(run_config("check", "check-h3-decoupled.json", dir.path()), 0);
    assert_eq!(run_config("check", "check-h3-fails.json", dir.path()), 5);
    let cert = json(dir.path().join("certificate.json"));
    assert!(cert["worst_residual"].as_f64().unwrap() > 0.0);
    assert!(cert["witness"]["s"].as_f64().is_some());
    // a coarser grid from the command line still finds the failure
    assert_eq!(run(&["check", "--config", config("check-h3-fails.json").to_str().unwrap(), "--grid", "s=log:1e-3:1e3:7;t=lin:0:5:6"], dir.path()), 5);
    let cert = json(dir.path().join("certificate.json"));
    assert!(cert["grid"].as_str().unwrap().contains("7 pts"));
}

#[test]
fn probe_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("probe", "probe-scalar-sampled.json", dir.path()), 0);
    assert!(fs::read_to_string(dir.path().join("envelope.csv")).unwrap().starts_with("tau,envelope\n"));
    assert_eq!(run_config("probe", "probe-scalar-sampled-fast.json", dir.path()), 5);
    let report = json(dir.path().join("report.json"));
    let w = &report["certificate"]["witness"];
    let elapsed = w["t"].as_f64().unwrap() - w["t0"].as_f64().unwrap();
    assert!(elapsed > 0.2 && elapsed < 0.6, "{elapsed}");
    assert_eq!(run_config("probe", "probe-growth.json", dir.path()), 6);
    // the same slack rescues the fast envelope
    assert_eq!(run(&["probe", "--config", config("probe-scalar-sampled-fast.json").to_str().unwrap(), "--tolerance", "3"], dir.path()), 0);
}

#[test]
fn probe_fits_cascade_envelope() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_config("probe", "probe-cascade.json", dir.path()), 0);
    let report = json(dir.path().join("report.json"));
    assert_eq!(report["fitted"], true);
    assert!(report["estimate"]["sigma"]["rate"].as_f64().unwrap() > 0.0);
    assert!(fs::read_to_string(dir.path().join("convergence.csv")).unwrap().starts_with("h,a\n"));
}

#[test]
fn reproduce_scalar_examples() {
    for name in ["example-2.1", "example-2.2", "example-3.7"] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(&["reproduce", name], dir.path()), 0, "{name}");
        let summary = json(dir.path().join("summary.json"));
        assert_eq!(summary["passed"], true);
        let manifest = json(dir.path().join("manifest.json"));
        assert_eq!(manifest["command"]["reproduce"]["name"], name);
    }
}
