//! Drives the `devdiet` binary through synth, pretrain, probe, eval and report.

use std::path::Path;
use std::process::{Command, Output};

fn devdiet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_devdiet"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .env_remove("DEVDIET__TRAIN__EPOCHS")
        .output()
        .expect("binary runs")
}

fn stdout_last_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).lines().last().unwrap_or_default().to_string()
}

const TINY: &[&str] = &[
    "--resolution", "24", "--classes", "3", "--train-videos-per-class", "2", "--test-videos-per-class", "1",
    "--frames-per-video", "6", "--depth-train", "12", "--depth-test", "6", "--cue-conflict", "6",
    "--silhouettes", "6", "--corruptions", "fog,jpeg", "--severities", "1,3",
];

const RUN: &[&str] = &[
    "--set", "name=tiny", "--set", "diet.name=std", "--set", "data.root=bench", "--set", "data.resolution=24",
    "--set", "train.epochs=2", "--set", "train.batch_size=6", "--set", "train.frames_per_clip=3",
    "--set", "train.checkpoint_every=1", "--set", "train.fim_batches=1", "--set", "eval.probe_epochs=3",
];

#[test]
fn full_command_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    let mut synth = vec!["synth", "--out", "bench"];
    synth.extend_from_slice(TINY);
    let o = devdiet(&synth, cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(devdiet(&synth, cwd).status.code(), Some(3), "second synth must refuse to overwrite");

    let mut pre = vec!["pretrain"];
    pre.extend_from_slice(RUN);
    let o = devdiet(&pre, cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = stdout_last_line(&o);
    assert!(cwd.join(&run).join("manifest.json").exists());

    let o = devdiet(&["probe", "--run", &run], cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["epoch"], 2);

    let o = devdiet(&["eval", "--run", &run, "--export-baseline", "base.json"], cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first_eval = stdout_last_line(&o);
    let o = devdiet(&["eval", "--run", &run, "--baseline", "base.json"], cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("| 100.0 |"), "{}", String::from_utf8_lossy(&o.stdout));
    let eval_dir = stdout_last_line(&o);
    assert_ne!(eval_dir, first_eval);

    let o = devdiet(&["report", "regenerate", &eval_dir], cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout, std::fs::read(cwd.join(&eval_dir).join("report.json")).unwrap());

    let o = devdiet(&["report", "compare", &first_eval, &eval_dir], cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("### Reference"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devdiet(&["pretrain", "--set", "diet.name=keto", "--set", "train.epochs=0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cdiet, adiet, tdiet, catdiet, combdiet, std") && err.contains("epochs"), "{err}");

    let o = devdiet(&["pretrain", "--set", "data.root=missing"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("devdiet synth --out missing"));
}

#[test]
fn single_part_synth_then_corrupt() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    let o = devdiet(&["synth", "silhouette", "--out", "sil", "--resolution", "24", "--silhouettes", "4"], cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(cwd.join("sil/manifest.jsonl").exists() && !cwd.join("sil/benchmark.json").exists());
    let o = devdiet(&["corrupt", "--in", "sil", "--out", "sil-c", "--types", "fog,pixelate", "--severities", "2"], cwd);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(cwd.join("sil-c/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 8);
    assert_eq!(devdiet(&["corrupt", "--in", "sil", "--out", "x", "--types", "blizzard"], cwd).status.code(), Some(2));
}
