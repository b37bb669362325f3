use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn rnls() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rnls"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rnls-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, amplitude: f64, t_end: f64) -> PathBuf {
    let text = format!(
        r#"{{
  "r_max": 16.0,
  "n": 256,
  "dt": 1e-3,
  "t_end": {t_end},
  "profile": {{ "kind": "gaussian", "amplitude": {amplitude}, "width": 1.0 }},
  "snapshot_stride": 10,
  "tail_threshold": 1e-2
}}"#
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_verify_round_trip() {
    let dir = workdir("simverify");
    let cfg = write_config(&dir, "run.json", 1.0, 0.05);
    let out = dir.join("out");
    let status = rnls()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("ledger.csv").is_file());
    assert!(fs::read_dir(out.join("snapshots")).unwrap().count() >= 1);

    let status = rnls()
        .args(["verify", "--suite", "all", "--run"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_eta_ordering_is_config_error() {
    let dir = workdir("badeta");
    let text = r#"{
  "r_max": 16.0, "n": 256, "dt": 1e-3, "t_end": 0.01,
  "profile": { "kind": "zero" },
  "eta1": 0.5, "eta2": 0.01, "eta3": 0.02
}"#;
    let cfg = dir.join("bad.json");
    fs::write(&cfg, text).unwrap();
    let status = rnls()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn truncation_breach_is_distinct_exit() {
    let dir = workdir("trunc");
    // wide profile on a small box with a tight budget
    let text = r#"{
  "r_max": 16.0, "n": 256, "dt": 1e-3, "t_end": 0.01,
  "profile": { "kind": "gaussian", "amplitude": 1.0, "width": 8.0 },
  "tail_threshold": 1e-8
}"#;
    let cfg = dir.join("wide.json");
    fs::write(&cfg, text).unwrap();
    let status = rnls()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reruns_are_identical_and_tampering_is_caught() {
    let dir = workdir("rerun");
    let cfg = write_config(&dir, "run.json", 1.0, 0.02);
    for name in ["a", "b"] {
        let status = rnls()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(dir.join("a/manifest.json")).unwrap();
    let b = fs::read(dir.join("b/manifest.json")).unwrap();
    assert_eq!(a, b, "reruns must be byte-identical");

    // corrupt one row and expect the integrity exit class
    let ledger = dir.join("a/ledger.csv");
    let mut text = fs::read_to_string(&ledger).unwrap();
    text = text.replacen("0.0000000000000000e0", "1.0000000000000000e0", 1);
    fs::write(&ledger, text).unwrap();
    let status = rnls()
        .args(["verify", "--run"])
        .arg(dir.join("a"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(6));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bubbles_and_scatter_emit_reports() {
    let dir = workdir("reports");
    let cfg = write_config(&dir, "small.json", 0.05, 0.6);
    let out = dir.join("out");
    assert!(rnls()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());

    let status = rnls()
        .args(["bubbles", "--eta1", "0.5", "--eta2", "0.0625", "--run"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("bubbles.json")).unwrap()).unwrap();
    assert!(!doc["reports"].as_array().unwrap().is_empty());

    let status = rnls()
        .args(["scatter", "--eps", "0.3", "--run"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("scatter.json")).unwrap()).unwrap();
    assert_eq!(doc["converged"], serde_json::Value::Bool(true));
    assert!(doc["uplus_checksum"].as_str().unwrap().len() == 64);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_on_missing_run_is_integrity_exit() {
    let status = rnls()
        .args(["verify", "--run", "/nonexistent/rnls-run"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(6));
}

#[test]
fn sweep_aggregates_with_fitted_exponent() {
    let dir = workdir("sweep");
    for (i, amp) in [0.01, 0.02, 0.04].iter().enumerate() {
        write_config(&dir, &format!("eps{i}.json"), *amp, 0.3);
    }
    let out = dir.join("agg");
    let pattern = dir.join("eps*.json");
    let status = rnls()
        .args(["sweep", "--configs"])
        .arg(pattern.to_str().unwrap())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "header + 3 rows: {csv}");
    assert!(lines[0].ends_with("fit_exponent"));
    // amplitudes scale linearly into L10 for small data: exponent ~ 1
    let exponent: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((exponent - 1.0).abs() < 0.1, "exponent {exponent}");
    fs::remove_dir_all(&dir).unwrap();
}
