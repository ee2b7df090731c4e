use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semigroup-hls"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().arg("run").args(args).arg("--out").arg(out).output().unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn spectral_suite_passes_on_two_states() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--suite", "spectral", "--chain", "builtin:two-state"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = report(dir.path());
    let checks = doc["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["status"] == "pass"));
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), checks.len() + 1);
}

#[test]
fn monte_carlo_runs_repeat_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--suite", "mc", "--paths", "3000", "--seed", "7", "--write-paths"];
    run(&args, a.path());
    let out = bin()
        .env("SEMIGROUP_HLS_THREADS", "2")
        .arg("run")
        .args(args)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert!(out.status.code().is_some());
    for file in ["report.json", "summary.csv", "paths.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn all_suites_report_anchored_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--suite", "all", "--paths", "2000", "--grid-n", "32"], dir.path());
    assert!(out.status.code().is_some());
    let doc = report(dir.path());
    let checks = doc["checks"].as_array().unwrap();
    assert!(checks.len() >= 25, "{} checks", checks.len());
    for c in checks {
        assert!(!c["anchor"].as_str().unwrap().is_empty(), "{c}");
    }
    assert_eq!(doc["summary"]["checks"], checks.len());
}

#[test]
fn config_file_is_overridden_by_flags_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"suite": "spectral", "chain": "builtin:no-such-chain"}"#).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--chain", "three-cycle", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(dir.path())["config"]["chain"], "three-cycle");

    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `chain`"));

    fs::write(&cfg, r#"{"paths": "many"}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("paths"));

    let out = run(&["--suite", "continuum", "--alpha", "2", "--p", "2"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha/p"));
}

#[test]
fn describe_known_and_unknown_checks() {
    let out = bin().args(["describe", "green-formula"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 ∫∫ (y∧s) f(x,y) dx dy"));

    let out = bin().args(["describe", "limit-constant"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Gamma(alpha+2)/2^{alpha+2}") && text.contains("Gamma(alpha+2)/2^{alpha+1}"));

    let out = bin().args(["describe", "stein-maximal-p2"]).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("p/(p-1)"));

    let out = bin().args(["describe", "bogus"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("green-formula") && err.contains("pairing-mc"));
}
