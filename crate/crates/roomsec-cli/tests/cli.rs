//! End-to-end checks of the CLI surface: command outputs, artifact
//! schemas, exit codes, and rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_roomsec")
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
  "seeds": [1],
  "strategies": ["base"],
  "dataset": { "n_classes": 3, "clips_per_class": 6, "train_per_class": 4, "seed": 5 },
  "train_bank": { "rooms": 1, "rirs_per_room": 3, "seed": 7 },
  "test_bank": { "rirs_per_room": 3, "seed": 8 },
  "model": { "channels": [2, 2, 4, 4], "fc_width": 16 },
  "train": { "max_epochs": 2 }
}"#,
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("roomsec_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_rirs_reports_counts_and_is_deterministic() {
    let dir = fresh_dir("gen_rirs");
    let config = tiny_config(&dir);
    let out_dir = dir.join("out");
    let args = [
        "gen-rirs",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--rooms",
        "2",
        "--per-room",
        "3",
    ];
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("2 rooms, 6 RIRs"), "stdout: {stdout}");
    let fingerprint = stdout
        .lines()
        .find(|l| l.starts_with("train bank"))
        .unwrap()
        .to_string();

    // Same seed, same fingerprint.
    let out2 = run(&args);
    let stdout2 = String::from_utf8_lossy(&out2.stdout);
    assert!(stdout2.contains(&fingerprint));
    assert!(out_dir.join("banks/train/manifest.json").exists());

    // Inspect the bank directory.
    let inspect = run(&["inspect", out_dir.join("banks/train").to_str().unwrap()]);
    assert!(inspect.status.success());
    let text = String::from_utf8_lossy(&inspect.stdout);
    assert!(text.contains("RIR bank: 2 rooms"), "{text}");
    assert!(text.contains("train_01"));
}

#[test]
fn experiment_writes_schema_csv_and_reruns_identically() {
    let dir = fresh_dir("experiment");
    let config = tiny_config(&dir);
    let out_dir = dir.join("out");
    let args = [
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    let out = run(&args);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv_path = out_dir.join("experiment.csv");
    let csv = std::fs::read(&csv_path).unwrap();
    let text = String::from_utf8_lossy(&csv);
    assert!(text.starts_with("strategy,room_id,t60_s,drr_group,seed,accuracy,selected_epoch\n"));
    // 1 clean row + 7 rooms x (1 all + 3 groups) rows.
    assert_eq!(text.lines().count(), 1 + 1 + 7 * 4);
    assert!(out_dir.join("run_manifest.json").exists());
    assert!(out_dir.join("checkpoints/base_seed1.ckpt").exists());

    // Rerun on the same banks: byte-identical CSV.
    let out2 = run(&args);
    assert!(out2.status.success());
    let csv2 = std::fs::read(&csv_path).unwrap();
    assert_eq!(csv, csv2, "rerun changed experiment.csv");

    // Inspect the report.
    let inspect = run(&["inspect", csv_path.to_str().unwrap()]);
    assert!(inspect.status.success());
    assert!(String::from_utf8_lossy(&inspect.stdout).contains("base"));
}

#[test]
fn train_eval_inspect_and_fake_cond_mode_mismatch() {
    let dir = fresh_dir("train_eval");
    let config = tiny_config(&dir);
    let out_dir = dir.join("out");
    let base = [
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];

    let mut train_args = vec!["train", "--strategy", "base", "--seed", "1"];
    train_args.extend_from_slice(&base);
    let out = run(&train_args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = out_dir.join("checkpoints/base_seed1.ckpt");
    assert!(ckpt.exists());
    assert!(ckpt.with_extension("history.json").exists());

    let mut eval_args = vec!["eval", "--checkpoint", ckpt.to_str().unwrap(), "--room", "clean"];
    eval_args.extend_from_slice(&base);
    let out = run(&eval_args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy"));

    let out = run(&["inspect", ckpt.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("strategy: base"));
    assert!(text.contains("parameters:"));

    // Unconditioned checkpoint into fake-cond: usage error, exit 2.
    let mut fc_args = vec!["fake-cond", "--checkpoint", ckpt.to_str().unwrap()];
    fc_args.extend_from_slice(&base);
    let out = run(&fc_args);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unconditioned"), "stderr: {err}");
}

#[test]
fn missing_checkpoint_is_a_usage_error() {
    let dir = fresh_dir("missing_ckpt");
    let config = tiny_config(&dir);
    let out = run(&[
        "fake-cond",
        "--checkpoint",
        dir.join("nope.ckpt").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn gen_dataset_exports_wav_tree() {
    let dir = fresh_dir("gen_dataset");
    let config = tiny_config(&dir);
    let out_dir = dir.join("out");
    let out = run(&[
        "gen-dataset",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("dataset/dataset.json").exists());
    assert!(out_dir.join("dataset/class_00/clip_0000.wav").exists());

    let inspect = run(&["inspect", out_dir.join("dataset").to_str().unwrap()]);
    assert!(inspect.status.success());
    assert!(String::from_utf8_lossy(&inspect.stdout).contains("n_classes: 3"));
}
