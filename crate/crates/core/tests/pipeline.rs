//! End-to-end run on a tiny benchmark: synth, pretrain, eval, report, sweep.

use devdiet_core::error::Error;
use devdiet_core::eval::ErrorTable;
use devdiet_core::run::{
    load_report, parse_axis, regenerate_report, run_eval, run_pretrain_on, run_sweep, Benchmark, BenchmarkSpec, EvalOptions,
    PretrainOptions, RunConfig, RunStatus,
};

fn spec() -> BenchmarkSpec {
    BenchmarkSpec {
        resolution: 24,
        classes: 3,
        train_videos_per_class: 2,
        test_videos_per_class: 1,
        frames_per_video: 6,
        test_frames_per_clip: 2,
        probe_frames_per_clip: 3,
        depth_train: 12,
        depth_test: 6,
        cue_conflict: 6,
        silhouettes: 6,
        corruptions: "fog,jpeg".into(),
        severities: "1,3".into(),
        ..BenchmarkSpec::default()
    }
}

fn config(out: &std::path::Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.name = "tiny".into();
    c.output_root = out.to_path_buf();
    c.diet.name = "std".into();
    c.data.resolution = 24;
    c.train.epochs = 2;
    c.train.batch_size = 6;
    c.train.frames_per_clip = 3;
    c.train.checkpoint_every = 1;
    c.train.fim_batches = 1;
    c.eval.probe_epochs = 3;
    c
}

#[test]
fn pretrain_eval_and_regenerate() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("bench");
    let bench = Benchmark::synthesize(&spec()).unwrap();
    bench.write(&root).unwrap();
    assert!(bench.write(&root).is_err(), "existing benchmark must not be overwritten");

    let cfg = config(dir.path());
    let (run_dir, manifest) = run_pretrain_on(&cfg, &bench.train, &PretrainOptions::default()).unwrap();
    assert_eq!(manifest.status, RunStatus::Complete);
    assert_eq!(manifest.checkpoints.len(), 2);

    // Without a matching baseline mCE is undefined and says why.
    let (eval_dir, report) = run_eval(&run_dir, &root, &EvalOptions::default()).unwrap();
    assert!(report.mce.is_none() && report.notes.iter().any(|n| n.contains("mCE")));
    assert!((0.0..=1.0).contains(&report.acc) && (0.0..=1.0).contains(&report.d_acc));
    assert_eq!(report.fim_curve.len(), 2);
    assert_eq!(report.cliff.rows.len(), bench.cliff.len());
    assert_eq!(load_report(&eval_dir).unwrap(), report);
    assert_eq!(regenerate_report(&eval_dir).unwrap(), report);

    // Normalizing by its own error table gives exactly 100.
    let own = ErrorTable::from_json(&std::fs::read_to_string(eval_dir.join("error_table.json")).unwrap()).unwrap();
    let opts = EvalOptions { baseline: Some(own), depth_curve: true };
    let (second, report2) = run_eval(&run_dir, &root, &opts).unwrap();
    assert_ne!(second, eval_dir);
    assert!((report2.mce.unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(report2.d_acc_curve.iter().map(|p| p.epoch).collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(report2.acc, report.acc);
    for f in ["report.md", "fim.svg", "ce.svg", "dacc.svg"] {
        assert!(second.join(f).exists(), "{f} missing");
    }

    // Tampering with a prediction file is detected.
    let clean = eval_dir.join("predictions_clean.jsonl");
    let text = std::fs::read_to_string(&clean).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    std::fs::write(&clean, lines[1..].join("\n") + "\n").unwrap();
    assert!(matches!(regenerate_report(&eval_dir), Err(Error::Data(_))));
}

#[test]
fn missing_benchmark_names_the_fix() {
    let dir = tempfile::tempdir().unwrap();
    let err = Benchmark::load(&dir.path().join("nowhere")).unwrap_err().to_string();
    assert!(err.contains("devdiet synth"), "{err}");
}

#[test]
fn sweep_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bench = Benchmark::synthesize(&spec()).unwrap();
    let axes = vec![parse_axis("seed=0,1").unwrap(), parse_axis("baseline=none").unwrap()];
    let ok = run_sweep(&config(dir.path()), &axes, &bench, &EvalOptions::default(), 2).unwrap();
    assert_eq!(ok.entries.len(), 2);
    assert!(ok.failures().is_empty(), "{:?}", ok.failures());
    let md = std::fs::read_to_string(std::path::Path::new(&ok.dir).join("comparison.md")).unwrap();
    assert!(md.contains("### Reference") && md.contains("| STD | 2 |"), "{md}");

    let mut diverging = config(dir.path());
    diverging.train.lr = 1e30;
    let bad = run_sweep(&diverging, &[parse_axis("seed=0,1").unwrap()], &bench, &EvalOptions::default(), 1).unwrap();
    assert_eq!(bad.failures().len(), 2);
    let md = std::fs::read_to_string(std::path::Path::new(&bad.dir).join("comparison.md")).unwrap();
    assert!(md.contains("0 (2 failed)") && md.contains("### Failed runs"), "{md}");
}
