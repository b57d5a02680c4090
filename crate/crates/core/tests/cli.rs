use std::path::Path;
use std::process::{Command, Output};

use secure_platoon::harness::load_metrics;

const BIN: &str = env!("CARGO_BIN_EXE_platoon");

fn config_path() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml"))
}

fn platoon(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = platoon(&[
        "simulate",
        "--config",
        config_path().to_str().unwrap(),
        "--runs",
        "3",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "metrics.json",
        "trace.csv",
        "events.csv",
        "estimation-position.svg",
        "estimation-velocity.svg",
        "relative-position.svg",
        "relative-velocity.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let m = load_metrics(out.join("metrics.json")).unwrap();
    assert_eq!(m.runs, 3);
    assert_eq!(m.horizon, 1000);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 5 * 1000);

    let plots = dir.path().join("plots");
    let o = platoon(&["plot", "--metrics", out.join("metrics.json").to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}

#[test]
fn mode_override() {
    let dir = tempfile::tempdir().unwrap();
    let o = platoon(&[
        "simulate",
        "--config",
        config_path().to_str().unwrap(),
        "--runs",
        "1",
        "--mode",
        "conventional",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let m = load_metrics(dir.path().join("metrics.json")).unwrap();
    assert_eq!(m.mode, secure_platoon::harness::Mode::Conventional);
    assert!(platoon(&["simulate", "--config", config_path().to_str().unwrap(), "--mode", "sloppy"]).status.code() == Some(2));
}

#[test]
fn analyze_prints_verdicts() {
    let o = platoon(&["analyze", "--config", config_path().to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["control"]["verdict"], "boundary");
    assert_eq!(v["estimation"]["status"], "violated");
    assert!((v["spectrum"]["spectral_radius"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn bad_config_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config_path()).unwrap().replace("runs = 100", "runs = 100\nturbo = true");
    std::fs::write(&path, text).unwrap();
    let o = platoon(&["analyze", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("turbo") && err.contains("bad.toml"), "{err}");

    let o = platoon(&["analyze", "--config", "/nonexistent.toml"]);
    assert!(String::from_utf8(o.stderr).unwrap().contains("/nonexistent.toml"));
}
