use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_switchctrl"));
    c.env_remove("SWITCHCTRL_SEED");
    c
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("switchctrl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn check(name: &str) -> (i32, Value) {
    let out = bin().args(["check", &fixture(name)]).output().unwrap();
    (out.status.code().unwrap(), serde_json::from_slice(&out.stdout).unwrap())
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let (code, report) = check("ctrl-not-suf1");
    assert_eq!(code, 0);
    assert_eq!(report["overall"]["verdict"], "yes");
    assert_eq!(report["overall"]["deciding"], "crit_equiv");

    let (code, report) = check("nec1-det-not-nec2");
    assert_eq!(code, 2);
    assert_eq!(report["overall"]["deciding"], "nec2");

    let (code, report) = check("nec1-not-det");
    assert_eq!(code, 2);
    let nec1 = report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["name"] == "nec1")
        .unwrap();
    assert_eq!(nec1["overall"], true);
}

#[test]
fn report_records_inputs() {
    let (_, report) = check("nec2-det-not-nec1");
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["seed"], 0);
    assert_eq!(report["tolerances"]["rank_tol"], 1e-9);
    assert_eq!(report["system_digest"].as_str().unwrap().len(), 64);
    assert!(report["skipped"]["crit_equiv"]
        .as_str()
        .unwrap()
        .contains("not constant"));
}

#[test]
fn seed_comes_from_the_environment() {
    let out = bin()
        .env("SWITCHCTRL_SEED", "42")
        .args(["check", &fixture("ctrl-not-suf1")])
        .output()
        .unwrap();
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 42);
}

#[test]
fn invalid_spec_exits_with_violations() {
    let path = tmp("bad.json");
    let text = std::fs::read_to_string(fixture("nec1-not-det")).unwrap().replacen(
        "\"lambda\": 1.0000000000000000e0",
        "\"lambda\": -1.0",
        1,
    );
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["check", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative-rate"));

    let out = bin().args(["check", "/nonexistent.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_policy_on_silent_system_follows_the_exponential() {
    let text = std::fs::read_to_string(fixture("cont-switch-bound"))
        .unwrap()
        .replace("\"lambda\": 1.0000000000000000e0", "\"lambda\": 0.0");
    let text = text.replace(
        "[[0.0000000000000000e0, 1.0000000000000000e0], [1.0000000000000000e0, 0.0000000000000000e0]]\n",
        "[[0.0, 0.0], [0.0, 0.0]]\n",
    );
    let path = tmp("silent.json");
    std::fs::write(&path, &text).unwrap();
    let out = bin()
        .args([
            "simulate",
            path.to_str().unwrap(),
            "--policy",
            "zero",
            "--paths",
            "1",
            "--seed",
            "7",
            "--x0",
            "1,0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let last: Vec<f64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .skip(2)
        .take(2)
        .map(|s| s.parse().unwrap())
        .collect();
    // A = [[0,1],[1,0]]: e^{A}e₁ = (cosh 1, sinh 1).
    assert!(
        (last[0] - 1f64.cosh()).abs() < 1e-9 && (last[1] - 1f64.sinh()).abs() < 1e-9,
        "{last:?}"
    );
}

#[test]
fn min_energy_summary_compares_with_the_bound() {
    let out = bin()
        .args([
            "simulate",
            &fixture("cont-switch-bound"),
            "--policy",
            "min-energy",
            "--N",
            "4",
            "--paths",
            "2000",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &report["mc"]["null_bound"]["rows"][0];
    assert_eq!(row["n_restarts"], 4);
    assert_eq!(row["pass"], true);
}

#[test]
fn min_energy_refuses_jumping_systems() {
    let out = bin()
        .args([
            "simulate",
            &fixture("nec1-not-det"),
            "--policy",
            "min-energy",
            "--paths",
            "10",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("C-nonzero"));
}

#[test]
fn feedback_dual_stays_in_the_kernel() {
    let out = bin()
        .args([
            "simulate",
            &fixture("nec1-det-not-nec2"),
            "--policy",
            "feedback-dual",
            "--paths",
            "50",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["mc"]["witness_dual"]["max_control_image"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn riccati_reports_viability() {
    let out = bin()
        .args([
            "riccati",
            &fixture("nec1-det-not-nec2"),
            "--y",
            "0,1",
            "--riccati-N-list",
            "1,10,100",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["riccati"]["tests"][0]["result"]["verdict"], "viable");

    let out = bin().args(["riccati", &fixture("nec2-det-not-nec1")]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn riccati_csv_lists_every_run() {
    let path = tmp("runs.csv");
    let out = bin()
        .args([
            "riccati",
            &fixture("nec1-det-not-nec2"),
            "--riccati-N-list",
            "1,10",
            "--dt",
            "0.01",
            "--format",
            "csv",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("N,t,k11,k12,k21,k22\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 101);
}

#[test]
fn verify_example_runs_bundles() {
    for name in ["nec2-det-not-nec1", "ctrl-not-suf1", "nec1-det-not-nec2"] {
        let out = bin().args(["verify-example", name, "--paths", "200"]).output().unwrap();
        let text = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "{name}: {text}");
        assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    }
    let out = bin().args(["verify-example", "no-such-example"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
