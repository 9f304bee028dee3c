//! `devdiet`: synthesize benchmarks, pretrain with a visual diet, probe, evaluate, sweep and
//! report.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 training divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use devdiet_core::corruptions::{build_corrupted_set, parse_severities, parse_types};
use devdiet_core::datasets::synth::CliffConfig;
use devdiet_core::datasets::{
    self, gen_cliff_views, gen_cue_conflict, gen_depth_dataset, gen_rotation_videos, gen_silhouettes, ingest_image_folder, write_image_dataset,
    write_video_dataset, ImageDataset, LabeledImage, DEPTH_CLASSES,
};
use devdiet_core::error::{Error, Result};
use devdiet_core::eval::{fit_probe, predict_items, top1, ErrorTable, EvalReport};
use devdiet_core::run::config::parse_override;
use devdiet_core::run::pretrain::load_encoder;
use devdiet_core::run::{
    comparison_table, load_report, parse_axis, regenerate_report, run_eval, run_pretrain, run_sweep, Benchmark, BenchmarkSpec,
    EvalOptions, PretrainOptions, RunConfig, RunManifest, SweepEntry,
};
use devdiet_core::seed;

#[derive(Parser)]
#[command(name = "devdiet", version, about = "Developmental visual-diet pretraining and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark (training videos, probe, depth, cue-conflict,
    /// silhouette, cliff and corrupted sets).
    Synth(SynthArgs),
    /// Corrupt every image of a dataset folder across types and severities.
    Corrupt(CorruptArgs),
    /// Pretrain an encoder from a run config.
    Pretrain(PretrainArgs),
    /// Fit a linear probe on a checkpoint and print clean accuracy.
    Probe(ProbeArgs),
    /// Evaluate a run's final checkpoint on the benchmark.
    Eval(EvalArgs),
    /// Expand a config template over axes and train and evaluate every combination.
    Sweep(SweepArgs),
    /// Regenerate or compare evaluation reports.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Part {
    Rotation,
    Depth,
    Cliff,
    Cueconflict,
    Silhouette,
}

#[derive(Args)]
struct SynthArgs {
    /// Generate only this dataset as a standalone folder; the whole benchmark otherwise.
    #[arg(value_enum)]
    part: Option<Part>,
    /// Output directory (must not already hold a benchmark).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    train_videos_per_class: Option<usize>,
    #[arg(long)]
    test_videos_per_class: Option<usize>,
    #[arg(long)]
    frames_per_video: Option<usize>,
    #[arg(long)]
    depth_train: Option<usize>,
    #[arg(long)]
    depth_test: Option<usize>,
    #[arg(long)]
    cue_conflict: Option<usize>,
    #[arg(long)]
    silhouettes: Option<usize>,
    /// `all` or comma-separated corruption names.
    #[arg(long)]
    corruptions: Option<String>,
    /// e.g. `1-5` or `1,3,5`.
    #[arg(long)]
    severities: Option<String>,
}

impl SynthArgs {
    fn spec(&self) -> BenchmarkSpec {
        let d = BenchmarkSpec::default();
        BenchmarkSpec {
            seed: self.seed.unwrap_or(d.seed),
            resolution: self.resolution.unwrap_or(d.resolution),
            classes: self.classes.unwrap_or(d.classes),
            train_videos_per_class: self.train_videos_per_class.unwrap_or(d.train_videos_per_class),
            test_videos_per_class: self.test_videos_per_class.unwrap_or(d.test_videos_per_class),
            frames_per_video: self.frames_per_video.unwrap_or(d.frames_per_video),
            depth_train: self.depth_train.unwrap_or(d.depth_train),
            depth_test: self.depth_test.unwrap_or(d.depth_test),
            cue_conflict: self.cue_conflict.unwrap_or(d.cue_conflict),
            silhouettes: self.silhouettes.unwrap_or(d.silhouettes),
            corruptions: self.corruptions.clone().unwrap_or(d.corruptions.clone()),
            severities: self.severities.clone().unwrap_or(d.severities.clone()),
            ..d
        }
    }
}

#[derive(Args)]
struct CorruptArgs {
    /// Dataset folder with a `manifest.jsonl`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only images of this split.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value = "all")]
    types: String,
    #[arg(long, default_value = "1-5")]
    severities: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run config; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the file and `DEVDIET__SECTION__KEY` variables.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let overrides = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Continue this run directory from its latest checkpoint; its stored config is used
    /// unless `-c` is given.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop with a checkpoint after this many epochs.
    #[arg(long)]
    stop_after: Option<u32>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Run directory.
    #[arg(long)]
    run: PathBuf,
    /// Benchmark root; the run's `data.root` by default.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint epoch; the latest by default.
    #[arg(long)]
    epoch: Option<u32>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Baseline error table for mCE normalization.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Also fit a depth probe for every stored checkpoint.
    #[arg(long)]
    depth_curve: bool,
    /// Copy the resulting error table here for use as a baseline.
    #[arg(long)]
    export_baseline: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// `name=v1,v2` or a bare axis name for all its values; repeat for a Cartesian product.
    /// Axes: diet, baseline, learner, backbone, seed.
    #[arg(long = "axis", required = true)]
    axes: Vec<String>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportAction {
    /// Recompute a report from its prediction files and check it matches byte for byte.
    Regenerate { eval_dir: PathBuf },
    /// Side-by-side comparison of evaluated runs, grouped by diet family.
    Compare { eval_dirs: Vec<PathBuf> },
}

fn read_table(path: &Path) -> Result<ErrorTable> {
    ErrorTable::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn data_root(manifest: &RunManifest, data: &Option<PathBuf>) -> PathBuf {
    data.clone().unwrap_or_else(|| manifest.config.data.root.clone())
}

fn synth_part(part: Part, spec: &BenchmarkSpec, out: &Path) -> Result<()> {
    if out.join(datasets::ingest::MANIFEST_FILE).exists() {
        return Err(Error::Data(format!("{} already holds a dataset; choose another --out", out.display())));
    }
    let (r, classes) = (spec.resolution, (0..spec.classes).collect::<Vec<_>>());
    let s = |tag: &str| seed::derive(spec.seed, &[seed::tag(tag)]);
    match part {
        Part::Rotation => {
            let train = gen_rotation_videos(spec.classes, spec.train_videos_per_class, spec.frames_per_video, r, s("train"))?;
            let test = gen_rotation_videos(spec.classes, spec.test_videos_per_class, spec.frames_per_video, r, s("test"))?;
            write_video_dataset(out, &[("train", &train), ("test", &test)])
        }
        Part::Depth => write_image_dataset(
            out,
            &[("train", &gen_depth_dataset(spec.depth_train, r, s("depth-train"))?), ("test", &gen_depth_dataset(spec.depth_test, r, s("depth-test"))?)],
        ),
        Part::Cliff => {
            let views = gen_cliff_views(&CliffConfig { resolution: r, ..CliffConfig::default() }, s("cliff"))?;
            let items = views
                .into_iter()
                .enumerate()
                .map(|(i, (image, a))| LabeledImage { id: format!("cliff-view{}", i + 1), image, label: a.index(), texture_label: None })
                .collect();
            let names = DEPTH_CLASSES.map(String::from).to_vec();
            write_image_dataset(out, &[("test", &ImageDataset { name: "cliff".into(), class_names: names, items })])
        }
        Part::Cueconflict => write_image_dataset(out, &[("test", &gen_cue_conflict(&classes, &classes, spec.cue_conflict, r, s("cue"))?)]),
        Part::Silhouette => write_image_dataset(out, &[("test", &gen_silhouettes(&classes, spec.silhouettes, r, s("silhouettes"))?)]),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = a.spec();
    match a.part {
        Some(part) => synth_part(part, &spec, &a.out)?,
        None => Benchmark::synthesize(&spec)?.write(&a.out)?,
    }
    println!("{}", a.out.display());
    Ok(())
}

fn corrupt(a: &CorruptArgs) -> Result<()> {
    let data = ingest_image_folder(&a.input, None)?;
    let images: Vec<_> = data.images.iter().filter(|(s, _)| *s == a.split).map(|(_, i)| (i.id.clone(), i.image.clone())).collect();
    let manifest =
        build_corrupted_set(&a.input.display().to_string(), &images, &parse_types(&a.types)?, &parse_severities(&a.severities)?, a.seed, &a.out)?;
    println!("{} corrupted images in {}", manifest.records.len(), a.out.display());
    Ok(())
}

fn pretrain(a: &PretrainArgs) -> Result<()> {
    let cfg = match (&a.resume, &a.config.config) {
        (Some(dir), None) if a.config.set.is_empty() => RunManifest::load(dir)?.config,
        _ => a.config.load()?,
    };
    let (dir, manifest) = run_pretrain(&cfg, &PretrainOptions { resume: a.resume.clone(), stop_after: a.stop_after })?;
    log::info!("{}: {:?} after {} epochs", manifest.label, manifest.status, manifest.epochs_completed);
    println!("{}", dir.display());
    Ok(())
}

fn probe(a: &ProbeArgs) -> Result<()> {
    let manifest = RunManifest::load(&a.run)?;
    manifest.verify(&a.run)?;
    let entry = match a.epoch {
        Some(e) => manifest
            .checkpoints
            .iter()
            .find(|c| c.epoch == e)
            .ok_or_else(|| Error::Argument(format!("no checkpoint at epoch {e}")))?,
        None => manifest.latest_checkpoint().ok_or_else(|| Error::Data("run has no checkpoints".into()))?,
    };
    let encoder = load_encoder(&a.run, &manifest, entry)?;
    let bench = Benchmark::load(&data_root(&manifest, &a.data))?;
    let resolved = manifest.config.resolve()?;
    let p = fit_probe(&encoder, &bench.probe_train, bench.class_names().len(), &resolved.probe, seed::derive(manifest.config.seed, &[seed::tag("probe")]))?;
    let acc = top1(&predict_items(&p, &encoder, &bench.probe_test))?;
    println!("{}", serde_json::json!({ "model": manifest.label, "epoch": entry.epoch, "acc": acc }));
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let manifest = RunManifest::load(&a.run)?;
    let baseline = match (&a.baseline, &manifest.config.eval.baseline_table) {
        (Some(p), _) | (None, Some(p)) => Some(read_table(p)?),
        (None, None) => None,
    };
    let opts = EvalOptions { baseline, depth_curve: a.depth_curve || manifest.config.eval.depth_curve };
    let (dir, report) = run_eval(&a.run, &data_root(&manifest, &a.data), &opts)?;
    if let Some(p) = &a.export_baseline {
        std::fs::copy(dir.join("error_table.json"), p).map_err(|e| Error::io(p, e))?;
    }
    print!("{}", report.to_markdown());
    println!("{}", dir.display());
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let template = a.config.load()?;
    let axes = a.axes.iter().map(|s| parse_axis(s)).collect::<Result<Vec<_>>>()?;
    let bench = Benchmark::load(&template.data.root)?;
    let opts = EvalOptions { baseline: a.baseline.as_deref().map(read_table).transpose()?, depth_curve: false };
    let result = run_sweep(&template, &axes, &bench, &opts, a.workers)?;
    print!("{}", comparison_table(&result.entries));
    println!("{}", result.dir);
    let failed = result.failures().len();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed", result.entries.len());
    }
    Ok(())
}

fn compare(dirs: &[PathBuf]) -> Result<()> {
    let entries = dirs
        .iter()
        .map(|d| {
            let report: EvalReport = load_report(d)?;
            let run_dir = d.parent().ok_or_else(|| Error::Data(format!("{} has no parent run", d.display())))?;
            let m = RunManifest::load(run_dir)?;
            Ok(SweepEntry {
                name: m.name.clone(),
                label: report.model.clone(),
                diet: m.config.diet.name.to_ascii_lowercase(),
                seed: m.config.seed,
                run_dir: Some(run_dir.display().to_string()),
                report: Some(report),
                error: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    print!("{}", comparison_table(&entries));
    Ok(())
}

fn report(action: &ReportAction) -> Result<()> {
    match action {
        ReportAction::Regenerate { eval_dir } => {
            let r = regenerate_report(eval_dir)?;
            let stored_path = eval_dir.join("report.json");
            let stored = std::fs::read(&stored_path).map_err(|e| Error::io(&stored_path, e))?;
            if r.to_json().as_bytes() != stored.as_slice() {
                return Err(Error::Data(format!("{} is not byte-identical to its regeneration", stored_path.display())));
            }
            print!("{}", r.to_json());
            Ok(())
        }
        ReportAction::Compare { eval_dirs } => compare(eval_dirs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    devdiet_nn::runtime::retain_heap();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Probe(a) => probe(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Report { action } => report(action),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
