use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mnl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mnl"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MNL_LOG_LEVEL")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TRAIN_CONFIG: &str = r#"{
  "version": 1,
  "architecture": { "widths": [2, 6, 2], "hidden": { "kind": "tanh" } },
  "data": { "source": "figure_eight", "n_points": 8, "noise_halfwidth": 0.05, "seed": 3 },
  "loss": { "kind": "squared" },
  "train": { "max_iters": 20, "log_every": 1 },
  "init": { "seed": 7 }
}"#;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn train_writes_checkpoint_and_log() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "train.json", TRAIN_CONFIG);
    let o = mnl(&["train", "--config", "train.json", "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = fs::read_to_string(tmp.path().join("out/checkpoint.json")).unwrap();
    let _: serde_json::Value = serde_json::from_str(&ckpt).unwrap();
    let log = fs::read_to_string(tmp.path().join("out/train_log.csv")).unwrap();
    assert!(log.lines().count() > 2);

    let o = mnl(&["train", "--config", "train.json", "--out", "again"], tmp.path());
    assert!(o.status.success());
    assert_eq!(log, fs::read_to_string(tmp.path().join("again/train_log.csv")).unwrap());

    let o = mnl(&["train", "--config", "train.json", "--out", "reseeded", "--seed", "99"], tmp.path());
    assert!(o.status.success());
    assert_ne!(log, fs::read_to_string(tmp.path().join("reseeded/train_log.csv")).unwrap());
}

#[test]
fn malformed_train_config_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    for (i, body) in [
        "{ not json",
        r#"{"version": 1, "architecture": {"widths": [2, 2]}, "data": {"source": "figure_eight", "n_points": 5, "noise_halfwidth": 0.0, "seed": 0}, "bogus": 1}"#,
        r#"{"version": 2, "architecture": {"widths": [2, 2]}, "data": {"source": "figure_eight", "n_points": 5, "noise_halfwidth": 0.0, "seed": 0}}"#,
        r#"{"version": 1, "architecture": {"widths": [3, 2]}, "data": {"source": "figure_eight", "n_points": 5, "noise_halfwidth": 0.0, "seed": 0}}"#,
        r#"{"version": 1, "architecture": {"widths": [2, 2]}, "data": {"source": "figure_eight", "n_points": 5, "noise_halfwidth": 0.0, "seed": 0}, "train": {"step_size": -1.0}}"#,
    ]
    .iter()
    .enumerate()
    {
        let name = format!("bad{i}.json");
        write(tmp.path(), &name, body);
        let out = format!("out{i}");
        let o = mnl(&["train", "--config", &name, "--out", &out], tmp.path());
        assert!(!o.status.success(), "config {i} accepted");
        assert!(!o.stderr.is_empty());
        assert!(!tmp.path().join(&out).exists(), "config {i} left output behind");
    }
}

#[test]
fn train_reads_csv_data() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "d.csv", "x0,x1,y\n0.1,0.2,0.5\n-0.3,0.4,-0.1\n0.9,-0.8,0.2\n");
    write(
        tmp.path(),
        "train.json",
        r#"{"version": 1, "architecture": {"widths": [2, 4, 1]}, "data": {"source": "csv", "path": "d.csv", "input_dim": 2}, "train": {"max_iters": 5}}"#,
    );
    let o = mnl(&["train", "--config", "train.json", "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("out/checkpoint.json").is_file());
}

#[test]
fn diagnose_reports_and_is_repeatable() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "train.json", TRAIN_CONFIG);
    assert!(mnl(&["train", "--config", "train.json", "--out", "model"], tmp.path()).status.success());
    write(
        tmp.path(),
        "diag.json",
        r#"{
  "version": 1,
  "checkpoint": "model/checkpoint.json",
  "data": { "source": "figure_eight", "n_points": 8, "noise_halfwidth": 0.05, "seed": 3 },
  "loss": { "kind": "squared" },
  "data_dim": 1
}"#,
    );
    let o = mnl(&["diagnose", "--config", "diag.json", "--out", "d1"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read_to_string(tmp.path().join("d1/diagnostics.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    for key in ["verdict", "rank_p", "required", "per_layer", "chain", "width", "lipschitz"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["required"], 16);
    assert!(mnl(&["diagnose", "--config", "diag.json", "--out", "d2"], tmp.path()).status.success());
    assert_eq!(a, fs::read_to_string(tmp.path().join("d2/diagnostics.json")).unwrap());
}

#[test]
fn diagnose_without_checkpoint_fails() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "diag.json",
        r#"{"version": 1, "checkpoint": "missing.json", "data": {"source": "figure_eight", "n_points": 4, "noise_halfwidth": 0.0, "seed": 0}, "data_dim": 1}"#,
    );
    let o = mnl(&["diagnose", "--config", "diag.json", "--out", "d"], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    assert!(!tmp.path().join("d").exists());
}

#[test]
fn verify_passes_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "v.json", r#"{"version": 1, "suite": {"instances": 20}}"#);
    let a = mnl(&["verify", "--config", "v.json", "--out", "rep"], tmp.path());
    assert!(a.status.success(), "{}", stdout(&a));
    let lines = stdout(&a);
    for name in ["weight_jacobian", "loss_gradient", "input_jacobian", "spectral_derivative", "zeta_eta_form"] {
        assert!(lines.lines().any(|l| l.starts_with(name) && l.contains("PASS")), "{lines}");
    }
    assert!(tmp.path().join("rep/oracle_report.json").is_file());
    let b = mnl(&["verify", "--config", "v.json"], tmp.path());
    assert_eq!(lines, stdout(&b));
}

#[test]
fn verify_detects_an_injected_fault() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "v.json", r#"{"version": 1, "suite": {"instances": 10, "fault": "weight_jacobian"}}"#);
    let o = mnl(&["verify", "--config", "v.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("weight_jacobian") && l.contains("FAIL")));
}

const TINY_EXPERIMENTS: &str = r#"{
  "version": 1,
  "four_region": { "n_samples": 60, "seeds": [0], "resolution": 32, "setup": { "train": { "max_iters": 3 } } },
  "figure_eight": { "n_points": 11, "slopes": [1.0, 5.0], "seeds": [0, 1], "probe_points": 32, "setup": { "train": { "max_iters": 3 } } },
  "swiss_roll": { "n_train": 30, "n_test": 40, "seeds": [0], "setup": { "train": { "max_iters": 3 } } }
}"#;

#[test]
fn experiments_dispatch_and_repeat_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "exp.json", TINY_EXPERIMENTS);
    for name in ["four-region", "figure-eight", "swiss-roll"] {
        let mut dirs = Vec::new();
        for _ in 0..2 {
            let o = mnl(&["experiment", name, "--config", "exp.json", "--out", "runs"], tmp.path());
            assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
            let dir = tmp.path().join(stdout(&o).trim());
            assert!(dir.starts_with(tmp.path().join("runs").join(name)));
            assert!(dir.join("config.json").is_file());
            assert!(fs::read_dir(&dir)
                .unwrap()
                .any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".svg")));
            dirs.push(dir);
        }
        assert_ne!(dirs[0], dirs[1]);
        assert_eq!(
            fs::read(dirs[0].join("metrics.csv")).unwrap(),
            fs::read(dirs[1].join("metrics.csv")).unwrap()
        );
    }
}

#[test]
fn experiment_seed_override_changes_results() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "exp.json", TINY_EXPERIMENTS);
    let a = mnl(&["experiment", "four-region", "--config", "exp.json"], tmp.path());
    let b = mnl(&["experiment", "four-region", "--config", "exp.json", "--seed", "5"], tmp.path());
    assert!(a.status.success() && b.status.success());
    let ma = fs::read_to_string(tmp.path().join(stdout(&a).trim()).join("metrics.csv")).unwrap();
    let mb = fs::read_to_string(tmp.path().join(stdout(&b).trim()).join("metrics.csv")).unwrap();
    assert!(mb.lines().nth(1).unwrap().starts_with("5,"));
    assert_ne!(ma, mb);
}

#[test]
fn unknown_experiment_and_bad_log_level_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = mnl(&["experiment", "spiral"], tmp.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("four-region") && err.contains("swiss-roll"), "{err}");
    assert!(!tmp.path().join("runs").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_mnl"))
        .args(["verify"])
        .env("MNL_LOG_LEVEL", "loud")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = mnl(&["frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
