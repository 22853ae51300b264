//! Config-loading, output, determinism, and exit-code behavior of the
//! command surface, both through the library functions and the binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use kingman_cli::commands::{cmd_analyze, cmd_simulate, CmdError};
use kingman_cli::config::load_config;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const E1_CONFIG: &str = r#"{
  "schema": 1,
  "model": {
    "environments": [{ "beta": 0.1, "q": { "atoms": [[0.5, 1.0]] } }],
    "p0": { "atoms": [[1.0, 1.0]] }
  },
  "horizon": 2000,
  "windows": [[0.0, 0.9]],
  "seed": 42
}"#;

const E4_CONFIG: &str = r#"{
  "schema": 1,
  "model": {
    "environments": [
      { "beta": 0.1, "q": { "atoms": [[0.5, 1.0]] } },
      { "beta": 0.1, "q": { "atoms": [[0.25, 1.0]] } }
    ],
    "p0": { "atoms": [[1.0, 1.0]] }
  },
  "horizon": 4000,
  "z_grid": { "start": 0.0, "stop": 1.0, "steps": 100 },
  "seed": 7
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kingman"))
}

#[test]
fn minimal_config_loads_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "e1.json", E1_CONFIG);
    let loaded = load_config(&path).unwrap();
    assert_eq!(loaded.model.k(), 1);
    assert_eq!(loaded.model.eta0(), 1.0);
    assert_eq!(loaded.config.horizon, 2000);
    assert_eq!(loaded.config.seed, 42);
    assert_eq!(loaded.sha256.len(), 64);

    // Serialize the parsed config back out and reload it.
    let round = serde_json::to_string(&loaded.config).unwrap();
    let path2 = write_config(dir.path(), "e1-roundtrip.json", &round);
    let reloaded = load_config(&path2).unwrap();
    assert_eq!(reloaded.model.k(), 1);
    assert_eq!(reloaded.config.horizon, loaded.config.horizon);
}

#[test]
fn invalid_configs_are_rejected_with_field_context() {
    let dir = tempfile::tempdir().unwrap();
    // beta = 1 violates the open-interval gate.
    let bad_beta = E1_CONFIG.replace("\"beta\": 0.1", "\"beta\": 1.0");
    let path = write_config(dir.path(), "bad-beta.json", &bad_beta);
    let err = load_config(&path).unwrap_err();
    assert!(matches!(err, CmdError::Config(_)), "{err}");
    assert!(err.to_string().contains("(0,1)"), "{err}");

    // Support of p0 below the mutant support: eta0 < eta_q.
    let bad_support = r#"{
      "schema": 1,
      "model": {
        "environments": [{ "beta": 0.5, "q": { "atoms": [[0.8, 1.0]] } }],
        "p0": { "atoms": [[0.5, 1.0]] }
      }
    }"#;
    let path = write_config(dir.path(), "bad-support.json", bad_support);
    let err = load_config(&path).unwrap_err();
    assert!(err.to_string().contains("eta0 < eta_q"), "{err}");

    // Unknown field reported with its path.
    let unknown = E1_CONFIG.replace("\"seed\": 42", "\"sneed\": 42");
    let path = write_config(dir.path(), "unknown.json", &unknown);
    let err = load_config(&path).unwrap_err();
    assert!(matches!(err, CmdError::Config(_)));

    // Wrong schema version.
    let wrong_schema = E1_CONFIG.replace("\"schema\": 1", "\"schema\": 2");
    let path = write_config(dir.path(), "schema.json", &wrong_schema);
    let err = load_config(&path).unwrap_err();
    assert!(err.to_string().contains("schema"), "{err}");
}

#[test]
fn density_grids_expand_to_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
      "schema": 1,
      "model": {
        "environments": [{
          "beta": 0.2,
          "q": { "grid": { "density": { "family": "beta", "alpha": 2.0, "beta": 5.0 }, "cells": 64 } }
        }],
        "p0": { "atoms": [[1.0, 1.0]] }
      }
    }"#;
    let path = write_config(dir.path(), "grid.json", config);
    let loaded = load_config(&path).unwrap();
    let q = loaded.model.cycle().env(0).q();
    assert_eq!(q.atoms().len(), 64);
    assert!((q.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "e4.json", E4_CONFIG);
    let loaded = load_config(&path).unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    std::fs::create_dir_all(&out1).unwrap();
    std::fs::create_dir_all(&out2).unwrap();
    cmd_analyze(&loaded, &out1).unwrap();
    cmd_analyze(&loaded, &out2).unwrap();
    cmd_simulate(&loaded, &out1).unwrap();
    cmd_simulate(&loaded, &out2).unwrap();
    for name in ["analyze.json", "trajectory.csv"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // The config hash is embedded in every output.
    let csv = std::fs::read_to_string(out1.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with(&format!("# kingman v0.1.0 config_sha256={}", loaded.sha256)));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let e1 = write_config(dir.path(), "e1.json", E1_CONFIG);
    let out = dir.path().join("out");

    // 0: success.
    let status = bin()
        .args(["analyze", "--config"])
        .arg(&e1)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // 1: config error.
    let bad = write_config(
        dir.path(),
        "bad.json",
        &E1_CONFIG.replace("\"beta\": 0.1", "\"beta\": 1.0"),
    );
    let status = bin()
        .args(["analyze", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // 2: numeric failure (genfun outside the convergence disk).
    let outside = write_config(
        dir.path(),
        "outside.json",
        &E1_CONFIG.replace("\"seed\": 42", "\"z_values\": [1.5], \"seed\": 42"),
    );
    let status = bin()
        .args(["genfun", "--config"])
        .arg(&outside)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // 3: property violation (verify cannot reach the threshold in 2 steps).
    let status = bin()
        .args(["verify", "--config"])
        .arg(&e1)
        .arg("--out")
        .arg(&out)
        .args(["--horizon", "2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn sweep_on_e4_reports_increasing_rho_and_positive_psi() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "e4.json", E4_CONFIG);
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut prev_rho = f64::NEG_INFINITY;
    let mut rows = 0;
    for line in csv.lines().skip(2) {
        let fields: Vec<&str> = line.split(',').collect();
        let rho: f64 = fields[1].parse().unwrap();
        let psi: f64 = fields[2].parse().unwrap();
        let gamma2: f64 = fields[3].parse().unwrap();
        assert!(rho > prev_rho, "rho not increasing at row {rows}");
        assert!(psi > 0.0, "psi not positive at row {rows}");
        assert!(gamma2 > 0.0, "gamma2 not positive at row {rows}");
        prev_rho = rho;
        rows += 1;
    }
    assert_eq!(rows, 101);
}

#[test]
fn verify_on_e1_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "e1.json", E1_CONFIG);
    let out = dir.path().join("out");
    let output = bin()
        .args(["verify", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("verify: pass"), "{stdout}");
    let csv = std::fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(csv.lines().count() > 2000);
}
