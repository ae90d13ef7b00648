use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use neutral_control::state::M2State;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn nctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nctl")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_state(p: &Path) -> M2State {
    M2State::from_json(&std::fs::read_to_string(p).unwrap(), 1).unwrap()
}

#[test]
fn analyze_exit_codes() {
    let cases = [
        ("example3d.json", 2),
        ("example3d_a3.json", 0),
        ("example3d_hat.json", 2),
        ("scalar_pilot.json", 0),
        ("common_root.json", 2),
        ("uncontrollable_pair.json", 2),
    ];
    for (file, code) in cases {
        let o = nctl(&["analyze", arg(&data(file)), "--kmax", "3"]);
        assert_eq!(o.status.code(), Some(code), "{file}: {}", String::from_utf8_lossy(&o.stderr));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(v.get("verdict").is_some(), "{file}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(nctl(&["bogus"]).status.code(), Some(1));
    assert_eq!(nctl(&["analyze"]).status.code(), Some(1));
    assert_eq!(nctl(&["analyze", "/nonexistent/system.json"]).status.code(), Some(1));
    assert_eq!(nctl(&["--help"]).status.code(), Some(0));
}

#[test]
fn spectrum_lists_every_window_root() {
    let o = nctl(&["spectrum", arg(&data("example3d_hat.json")), "--kmax", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("m,k,re,im"));
    // three eigenvalue chains, 11 branches each
    assert_eq!(lines.count(), 33);
}

#[test]
fn output_is_deterministic() {
    let run = || nctl(&["report", arg(&data("scalar_pilot.json")), "--kmax", "4"]).stdout;
    assert_eq!(run(), run());
}

#[test]
fn report_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = nctl(&["report", arg(&data("scalar_pilot.json")), "--kmax", "4", "--out", arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("spectrum.csv").exists());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(v.get("analysis").is_some() && v.get("conditioning").is_some());
}

#[test]
fn zero_control_gives_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let ctl = dir.path().join("zero.csv");
    std::fs::write(&ctl, "t,u1\n0,0\n2,0\n").unwrap();
    let o = nctl(&["simulate", arg(&data("scalar_pilot.json")), arg(&ctl), "--time", "2", "--grid", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let vals: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(vals[1..].iter().all(|&x| x == 0.0), "{line}");
        rows += 1;
    }
    assert!(rows >= 100);
}

#[test]
fn steered_control_round_trips_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("steer");
    let sim = dir.path().join("sim");
    let o = nctl(&[
        "steer",
        arg(&data("scalar_pilot.json")),
        arg(&data("scalar_pilot_target.json")),
        "--time",
        "1.5",
        "--kmax",
        "4",
        "--grid",
        "200",
        "--out",
        arg(&st),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["control.csv", "trajectory.csv", "moments.json", "terminal.json", "verification.json"] {
        assert!(st.join(f).exists(), "{f}");
    }
    let o = nctl(&[
        "simulate",
        arg(&data("scalar_pilot.json")),
        arg(&st.join("control.csv")),
        "--time",
        "1.5",
        "--grid",
        "200",
        "--out",
        arg(&sim),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let a = read_state(&st.join("terminal.json"));
    let b = read_state(&sim.join("terminal.json"));
    let err = a.sub(&b).norm();
    assert!(err < 1e-6 * a.norm().max(1.0), "{err}");
}

#[test]
fn subcritical_steering_needs_override() {
    let args = |extra: &'static [&'static str]| {
        let mut v = vec![
            "steer".to_string(),
            arg(&data("scalar_pilot.json")).to_string(),
            arg(&data("scalar_pilot_target.json")).to_string(),
            "--time".into(),
            "0.9".into(),
            "--kmax".into(),
            "3".into(),
            "--grid".into(),
            "100".into(),
        ];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let run = |v: Vec<String>| Command::new(env!("CARGO_BIN_EXE_nctl")).args(v).output().unwrap();
    assert_ne!(run(args(&[])).status.code(), Some(0));
    let o = run(args(&["--allow-subcritical"]));
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}
