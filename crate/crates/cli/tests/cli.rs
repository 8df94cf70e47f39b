//! End-to-end tests of the binary: exit codes, diagnostics, output files,
//! and the seed-precedence contract (environment beats flag beats config).

use std::path::Path;
use std::process::{Command, Output};

const REFERENCE_CONFIG: &str = r#"{
  "problem": {
    "state": {"dim": 2, "entries": [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [0.5, 0.0]]},
    "povm": [
      {"dim": 2, "entries": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]},
      {"dim": 2, "entries": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}
    ]
  },
  "grid": {"l": [2], "delta": [3.0], "seeds": [101, 202]}
}"#;

/// Same shape, but the POVM sums to 0.9·I.
const INCOMPLETE_POVM_CONFIG: &str = r#"{
  "problem": {
    "state": {"dim": 2, "entries": [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [0.5, 0.0]]},
    "povm": [
      {"dim": 2, "entries": [[0.9, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]},
      {"dim": 2, "entries": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.9, 0.0]]}
    ]
  },
  "grid": {"l": [2], "delta": [3.0], "seeds": [101]}
}"#;

/// Valid POVM, but a negative ensemble prior.
const NEGATIVE_PRIOR_CONFIG: &str = r#"{
  "problem": {
    "ensemble": {
      "probs": [1.2, -0.2],
      "states": [
        {"dim": 2, "entries": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]},
        {"dim": 2, "entries": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}
      ]
    },
    "povm": [
      {"dim": 2, "entries": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]},
      {"dim": 2, "entries": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}
    ]
  },
  "grid": {"l": [2], "delta": [3.0], "seeds": [101]}
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_povm-squeeze"));
    cmd.args(args).env_remove("POVM_SQUEEZE_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_accepts_reference_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), REFERENCE_CONFIG);
    let out = run(&["--config", config.to_str().unwrap(), "validate"], &[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(stdout.contains("ok: povm"), "stdout: {stdout}");
    assert!(stdout.contains("ok: state"), "stdout: {stdout}");
}

#[test]
fn validate_rejects_incomplete_povm() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), INCOMPLETE_POVM_CONFIG);
    let out = run(&["--config", config.to_str().unwrap(), "validate"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = stderr_of(&out);
    assert!(stderr.contains("completeness"), "stderr: {stderr}");
}

#[test]
fn validate_rejects_negative_prior() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NEGATIVE_PRIOR_CONFIG);
    let out = run(&["--config", config.to_str().unwrap(), "validate"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = stderr_of(&out);
    assert!(stderr.contains("probability"), "stderr: {stderr}");
}

#[test]
fn validate_rejects_malformed_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{ this is not json");
    let out = run(&["--config", config.to_str().unwrap(), "validate"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("config.json"));
}

#[test]
fn missing_config_flag_is_a_validation_error() {
    let out = run(&["validate"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--config"));
}

#[test]
fn suite_flags_invalid_problem_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), INCOMPLETE_POVM_CONFIG);
    let out = run(&["--config", config.to_str().unwrap(), "suite"], &[]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(stdout.contains("FAIL problem-validity"), "stdout: {stdout}");
    assert!(stderr_of(&out).contains("failed checks"), "stderr: {}", stderr_of(&out));
}

#[test]
fn suite_passes_on_builtin_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "suite"], &[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(stdout.contains("suite: all"), "stdout: {stdout}");
    assert!(!stdout.contains("FAIL"), "stdout: {stdout}");
}

/// The seed contract: `POVM_SQUEEZE_SEED` beats `--seed`, which beats the
/// config's seed list; the effective per-cell seed lands in the JSON report.
#[test]
fn seed_precedence_env_beats_flag_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), REFERENCE_CONFIG);
    let outputs = |name: &str, extra: &[&str], env: &[(&str, &str)]| -> (Vec<u8>, Vec<u64>) {
        let out_dir = dir.path().join(name);
        let mut args = vec![
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        args.push("compress");
        let out = run(&args, env);
        assert_eq!(out.status.code(), Some(0), "{name} stderr: {}", stderr_of(&out));
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
        let seeds = report["cells"]
            .as_array()
            .unwrap()
            .iter()
            .map(|cell| cell["seed"].as_u64().unwrap())
            .collect();
        (std::fs::read(out_dir.join("results.csv")).unwrap(), seeds)
    };

    let (flag_csv, flag_seeds) = outputs("flag", &["--seed", "7"], &[]);
    let (env_csv, env_seeds) = outputs("env", &["--seed", "9"], &[("POVM_SQUEEZE_SEED", "7")]);
    let (_, config_seeds) = outputs("config", &[], &[]);

    assert_eq!(flag_seeds, vec![7, 7], "--seed must replace the config's seed list");
    assert_eq!(env_seeds, vec![7, 7], "env seed 7 must override --seed 9");
    assert_eq!(config_seeds, vec![101, 202], "no override: the config seeds run as given");
    assert_eq!(flag_csv, env_csv, "equal effective seeds must give identical CSVs");
}

#[test]
fn rejects_malformed_seed_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), REFERENCE_CONFIG);
    let out = run(
        &["--config", config.to_str().unwrap(), "validate"],
        &[("POVM_SQUEEZE_SEED", "not-a-number")],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("POVM_SQUEEZE_SEED"));
}

#[test]
fn compress_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), REFERENCE_CONFIG);
    let out_dir = dir.path().join("out");
    let out = run(
        &[
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "compress",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    // Header plus one row per (l, δ, seed) cell.
    assert_eq!(csv.lines().count(), 1 + 2, "csv:\n{csv}");
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 2);
}

#[test]
fn chernoff_mc_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["--out", dir.path().to_str().unwrap(), "chernoff-mc", "--trials", "400"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(dir.path().join("chernoff.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "csv:\n{csv}");
}

#[test]
fn holevo_prints_bound_lines() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NEGATIVE_PRIOR_CONFIG.replace("-0.2", "0.4").replace("1.2", "0.6").as_str());
    let out = run(
        &[
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "holevo",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(stdout.contains("I("), "stdout: {stdout}");
}
