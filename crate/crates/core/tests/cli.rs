//! End-to-end runs of the `cidlab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cidlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cidlab"))
        .args(args)
        .output()
        .expect("run cidlab")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const KOLMOGOROV_CONFIG: &str = r#"{
  "version": 1,
  "id": "iid-uniform-sup",
  "process": {"family": "de_finetti",
              "mixing": {"kind": "normal", "mean": 0.0, "variance": 0.0},
              "kernel": {"kind": "fixed", "dist": {"kind": "uniform", "lo": 0.0, "hi": 1.0}}},
  "statistic": {"kind": "sup_norm", "centering": "W"},
  "n": 500,
  "replicas": 200,
  "seed": 3,
  "limit": {"kind": "kolmogorov"},
  "test": {"kind": "ks_one_sample"},
  "tolerance": 0.15
}"#;

#[test]
fn simulate_writes_artifacts_and_report_renders_them() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, KOLMOGOROV_CONFIG).unwrap();
    let out = dir.path().join("run");
    let o = cidlab(&[
        "simulate",
        "--config",
        path_str(&config),
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in [
        "reports.json",
        "summary.csv",
        "timings.csv",
        "paths.csv",
        "path0.json",
        "empirical_process0.csv",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let samples = fs::read_to_string(out.join("samples/iid-uniform-sup.csv")).unwrap();
    assert_eq!(samples.lines().count(), 201);
    let header = fs::read_to_string(out.join("empirical_process0.csv")).unwrap();
    assert!(header.starts_with("# {\"n\":500,\"kind\":\"W\""));

    let o = cidlab(&["report", "--in", path_str(&out), "--svg"]);
    assert!(o.status.success());
    assert!(out.join("figures/iid-uniform-sup-qq.svg").exists());
}

#[test]
fn rejects_unknown_config_version() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        KOLMOGOROV_CONFIG.replace("\"version\": 1", "\"version\": 9"),
    )
    .unwrap();
    let o = cidlab(&[
        "simulate",
        "--config",
        path_str(&config),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("version"));
}

#[test]
fn oracle_exit_codes_follow_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("urn.json");
    fs::write(
        &spec,
        r#"{"family": "polya_urn", "white": 1, "red": 1, "reinforcement": {"kind": "deterministic", "d": [1, 2]}}"#,
    )
    .unwrap();
    let s = path_str(&spec);
    assert!(cidlab(&["oracle", "--spec", s, "--depth", "5"])
        .status
        .success());
    let o = cidlab(&[
        "oracle",
        "--spec",
        s,
        "--depth",
        "3",
        "--check",
        "exchangeable",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["violated"], true);
    let o = cidlab(&[
        "oracle", "--spec", s, "--depth", "5", "--check", "permuted", "--tau", "2,1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = cidlab(&["oracle", "--spec", s, "--depth", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_exact_suite_and_unknown_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = cidlab(&[
        "verify",
        "--suite",
        "exact-cid",
        "--seed",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(o.status.success());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().count() > 5);
    let o = cidlab(&["verify", "--suite", "nope", "--out", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
