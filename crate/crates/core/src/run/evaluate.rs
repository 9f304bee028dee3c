//! `eval` and `report`: the full metric suite over a trained run, and its recomputation
//! from the stored prediction files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::benchmark::Benchmark;
use super::pretrain::{fresh_dir, load_encoder, read_metrics, RunManifest};
use crate::corruptions::CorruptionType;
use crate::datasets::{DepthAnswer, ImageDataset, LabeledImage};
use crate::error::{Error, Result};
use crate::eval::metrics::CliffRow;
use crate::eval::plot::{bar_chart, line_chart};
use crate::eval::{
    corruption_errors, depth_curve, errors_from_predictions, fit_probe, mce, predict_items, read_predictions, shape_bias, top1,
    visual_cliff_table, write_predictions, CliffTable, CurvePoint, DenominatorPolicy, ErrorTable, EvalReport, Prediction,
};
use crate::fsio::write_atomic;
use crate::seed;

/// Reference error table for mCE normalization, built from a fixed-seed standard-augmentation
/// run on the default benchmark.
pub const BUNDLED_BASELINE: &str = include_str!("../../fixtures/baseline_error_table.json");

pub fn bundled_baseline() -> Result<ErrorTable> {
    ErrorTable::from_json(BUNDLED_BASELINE)
}

mod files {
    pub const CLEAN: &str = "predictions_clean.jsonl";
    pub const CORRUPTED: &str = "predictions_corrupted.jsonl";
    pub const CUE: &str = "predictions_cue_conflict.jsonl";
    pub const SILHOUETTES: &str = "predictions_silhouettes.jsonl";
    pub const DEPTH: &str = "predictions_depth.jsonl";
    pub const CLIFF: &str = "predictions_cliff.jsonl";
    pub const ERRORS: &str = "error_table.json";
    pub const BASELINE: &str = "baseline_table.json";
    pub const DACC_CURVE: &str = "dacc_curve.json";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_MD: &str = "report.md";
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    /// Normalization table; the bundled reference when `None`.
    pub baseline: Option<ErrorTable>,
    /// Also fit a depth probe per stored checkpoint.
    pub depth_curve: bool,
}

fn corrupted_id(p: &Prediction) -> Result<(CorruptionType, u8)> {
    let bad = || Error::Data(format!("prediction id `{}` does not name a corruption cell", p.image_id));
    let (_, cell) = p.image_id.rsplit_once('@').ok_or_else(bad)?;
    let (t, s) = cell.split_once('/').ok_or_else(bad)?;
    Ok((t.parse()?, s.parse().map_err(|_| bad())?))
}

fn group_cells(preds: &[Prediction]) -> Result<Vec<(CorruptionType, u8, Vec<Prediction>)>> {
    let mut by: BTreeMap<(CorruptionType, u8), Vec<Prediction>> = BTreeMap::new();
    for p in preds {
        by.entry(corrupted_id(p)?).or_default().push(p.clone());
    }
    Ok(by.into_iter().map(|((t, s), v)| (t, s, v)).collect())
}

fn cue_bias(preds: &[Prediction]) -> Result<f64> {
    let shape: Vec<usize> = preds.iter().map(|p| p.label.unwrap_or(usize::MAX)).collect();
    let texture: Vec<usize> = preds.iter().map(|p| p.texture_label.unwrap_or(usize::MAX)).collect();
    let argmax: Vec<usize> = preds.iter().map(|p| p.argmax).collect();
    shape_bias(&argmax, &shape, &texture, &DenominatorPolicy::PerModel)
}

fn cliff_from(preds: &[Prediction]) -> CliffTable {
    let ans = |i: usize| if i == DepthAnswer::Yes.index() { DepthAnswer::Yes } else { DepthAnswer::No };
    let rows: Vec<CliffRow> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let truth = ans(p.label.unwrap_or(usize::MAX));
            CliffRow { view: i + 1, answer: ans(p.argmax), truth, correct: ans(p.argmax) == truth }
        })
        .collect();
    CliffTable { all_correct: rows.iter().all(|r| r.correct), rows }
}

/// Metrics that derive from stored files alone.
struct Derived {
    acc: f64,
    table: ErrorTable,
    mce: Option<f64>,
    ce: BTreeMap<String, f64>,
    s_bias: Option<f64>,
    silhouette_acc: f64,
    d_acc: f64,
    cliff: CliffTable,
    notes: Vec<String>,
}

fn derive(dir: &Path, types: &[CorruptionType], severities: &[u8], model: &str, dataset: &str) -> Result<Derived> {
    let read = |f: &str| read_predictions(&dir.join(f));
    let table = errors_from_predictions(dataset, model, &group_cells(&read(files::CORRUPTED)?)?, types, severities)?;
    let mut notes = Vec::new();
    let baseline_path = dir.join(files::BASELINE);
    let (mce_v, ce) = if baseline_path.exists() {
        let baseline = ErrorTable::from_json(&std::fs::read_to_string(&baseline_path).map_err(|e| Error::io(&baseline_path, e))?)?;
        match mce(&table, &baseline) {
            Ok(r) => (Some(r.mce), r.ce.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
            Err(e) => {
                notes.push(format!("mCE undefined: {e}"));
                (None, BTreeMap::new())
            }
        }
    } else {
        notes.push("mCE undefined: no baseline table matches this benchmark".into());
        (None, BTreeMap::new())
    };
    let s_bias = match cue_bias(&read(files::CUE)?) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("shape bias undefined: {e}"));
            None
        }
    };
    Ok(Derived {
        acc: top1(&read(files::CLEAN)?)?,
        table,
        mce: mce_v,
        ce,
        s_bias,
        silhouette_acc: top1(&read(files::SILHOUETTES)?)?,
        d_acc: top1(&read(files::DEPTH)?)?,
        cliff: cliff_from(&read(files::CLIFF)?),
        notes,
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    write_atomic(path, (serde_json::to_string_pretty(value)? + "\n").as_bytes())
}

fn plots(dir: &Path, report: &EvalReport) -> Result<()> {
    let fim: Vec<(f64, f64)> = report.fim_curve.iter().map(|p| (p.epoch as f64, p.value)).collect();
    write_atomic(&dir.join("fim.svg"), line_chart("FIM trace", "epoch", "trace", &[(report.model.clone(), fim)]).as_bytes())?;
    if !report.ce.is_empty() {
        let bars: Vec<(String, f64)> = report.ce.iter().map(|(k, v)| (k.clone(), 100.0 * v)).collect();
        write_atomic(&dir.join("ce.svg"), bar_chart(&format!("{}: CE by corruption", report.model), "CE (%)", &bars).as_bytes())?;
    }
    if !report.d_acc_curve.is_empty() {
        let pts: Vec<(f64, f64)> = report.d_acc_curve.iter().map(|p| (p.epoch as f64, p.value)).collect();
        write_atomic(&dir.join("dacc.svg"), line_chart("depth accuracy", "epoch", "dAcc", &[(report.model.clone(), pts)]).as_bytes())?;
    }
    Ok(())
}

fn fim_curve(run_dir: &Path, manifest: &RunManifest) -> Result<Vec<CurvePoint>> {
    Ok(manifest.metrics(run_dir)?.iter().map(|r| CurvePoint { epoch: r.epoch, value: r.fim_trace }).collect())
}

/// Evaluates the run's final checkpoint on the benchmark under `root`.
pub fn run_eval(run_dir: &Path, root: &Path, opts: &EvalOptions) -> Result<(PathBuf, EvalReport)> {
    let bench = Benchmark::load(root)?;
    run_eval_on(run_dir, &bench, opts)
}

pub fn run_eval_on(run_dir: &Path, bench: &Benchmark, opts: &EvalOptions) -> Result<(PathBuf, EvalReport)> {
    let manifest = RunManifest::load(run_dir)?;
    manifest.verify(run_dir)?;
    let entry = manifest
        .latest_checkpoint()
        .ok_or_else(|| Error::Data(format!("{} has no checkpoint to evaluate", run_dir.display())))?;
    let encoder = load_encoder(run_dir, &manifest, entry)?;
    let resolved = manifest.config.resolve()?;
    let probe_seed = seed::derive(manifest.config.seed, &[seed::tag("probe")]);
    let out = fresh_dir(&run_dir.join("eval"))?;
    let model = manifest.label.clone();
    let dataset = bench.hashes()["corrupted"].clone();
    let types = bench.corruption_types()?;
    let severities = bench.severities()?;

    let classes = bench.class_names().len();
    let probe = fit_probe(&encoder, &bench.probe_train, classes, &resolved.probe, probe_seed)?;
    write_predictions(&out.join(files::CLEAN), &predict_items(&probe, &encoder, &bench.probe_test))?;
    let (records, images): (Vec<_>, Vec<_>) = bench.corrupted.iter().cloned().unzip();
    let (table, cells) =
        corruption_errors(&probe, &encoder, &records, &images, &bench.test_labels(), &types, &severities, (&dataset, &model))?;
    write_predictions(&out.join(files::CORRUPTED), &cells.into_iter().flat_map(|c| c.2).collect::<Vec<_>>())?;
    write_json(&out.join(files::ERRORS), &table)?;
    let baseline = match &opts.baseline {
        Some(b) => Some(b.clone()),
        None => bundled_baseline().ok(),
    };
    if let Some(b) = baseline.filter(|b| b.dataset == dataset && b.shape() == table.shape()) {
        write_json(&out.join(files::BASELINE), &b)?;
    }
    write_predictions(&out.join(files::CUE), &predict_items(&probe, &encoder, &bench.cue_conflict.items))?;
    write_predictions(&out.join(files::SILHOUETTES), &predict_items(&probe, &encoder, &bench.silhouettes.items))?;

    let depth_probe = fit_probe(&encoder, &bench.depth_train.items, 2, &resolved.probe, probe_seed)?;
    write_predictions(&out.join(files::DEPTH), &predict_items(&depth_probe, &encoder, &bench.depth_test.items))?;
    let cliff_items: Vec<LabeledImage> = bench
        .cliff
        .iter()
        .enumerate()
        .map(|(i, (img, a))| LabeledImage { id: format!("cliff-view{}", i + 1), image: img.clone(), label: a.index(), texture_label: None })
        .collect();
    write_predictions(&out.join(files::CLIFF), &predict_items(&depth_probe, &encoder, &cliff_items))?;
    debug_assert_eq!(visual_cliff_table(&depth_probe, &encoder, &bench.cliff)?, cliff_from(&read_predictions(&out.join(files::CLIFF))?));

    let d_acc_curve = if opts.depth_curve {
        let series = manifest.checkpoints.iter().map(|c| load_encoder(run_dir, &manifest, c).map(|e| (c.epoch, e)));
        let test = ImageDataset { name: "depth".into(), class_names: bench.depth_test.class_names.clone(), items: bench.depth_test.items.clone() };
        let curve = depth_curve(series, &bench.depth_train, &test, &resolved.probe, probe_seed)?;
        write_json(&out.join(files::DACC_CURVE), &curve)?;
        curve
    } else {
        Vec::new()
    };

    let d = derive(&out, &types, &severities, &model, &dataset)?;
    debug_assert_eq!(d.table, table);
    let report = EvalReport {
        model,
        config_hash: manifest.config_hash.clone(),
        checkpoint_hash: entry.sha256.clone(),
        baseline: if out.join(files::BASELINE).exists() { read_baseline_name(&out)? } else { "none".into() },
        acc: d.acc,
        mce: d.mce,
        ce: d.ce,
        s_bias: d.s_bias,
        silhouette_acc: d.silhouette_acc,
        d_acc: d.d_acc,
        cliff: d.cliff,
        fim_curve: fim_curve(run_dir, &manifest)?,
        d_acc_curve,
        files: [
            ("clean", files::CLEAN),
            ("corrupted", files::CORRUPTED),
            ("cue_conflict", files::CUE),
            ("silhouettes", files::SILHOUETTES),
            ("depth", files::DEPTH),
            ("cliff", files::CLIFF),
            ("error_table", files::ERRORS),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect(),
        notes: d.notes,
    };
    write_atomic(&out.join(files::REPORT_JSON), report.to_json().as_bytes())?;
    write_atomic(&out.join(files::REPORT_MD), report.to_markdown().as_bytes())?;
    plots(&out, &report)?;
    Ok((out, report))
}

fn read_baseline_name(dir: &Path) -> Result<String> {
    let p = dir.join(files::BASELINE);
    Ok(ErrorTable::from_json(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?.model)
}

pub fn load_report(eval_dir: &Path) -> Result<EvalReport> {
    let p = eval_dir.join(files::REPORT_JSON);
    serde_json::from_str(&std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?).map_err(|e| Error::ingest(&p, e.to_string()))
}

/// Rebuilds a report from its prediction files and the run's metrics; errors if any
/// number differs from the stored report.
pub fn regenerate_report(eval_dir: &Path) -> Result<EvalReport> {
    let stored = load_report(eval_dir)?;
    let errors_path = eval_dir.join(files::ERRORS);
    let table = ErrorTable::from_json(&std::fs::read_to_string(&errors_path).map_err(|e| Error::io(&errors_path, e))?)?;
    let types: Vec<CorruptionType> = table.cells.keys().copied().collect();
    let severities: Vec<u8> = table.cells.values().next().map(|r| r.keys().copied().collect()).unwrap_or_default();
    let d = derive(eval_dir, &types, &severities, &stored.model, &table.dataset)?;
    let run_dir = eval_dir.parent().ok_or_else(|| Error::Data("evaluation directory has no parent run".into()))?;
    let fim = read_metrics(&run_dir.join(super::pretrain::METRICS_FILE))?
        .iter()
        .map(|r| CurvePoint { epoch: r.epoch, value: r.fim_trace })
        .collect();
    let curve_path = eval_dir.join(files::DACC_CURVE);
    let d_acc_curve = if curve_path.exists() {
        serde_json::from_str(&std::fs::read_to_string(&curve_path).map_err(|e| Error::io(&curve_path, e))?)?
    } else {
        Vec::new()
    };
    let report = EvalReport {
        acc: d.acc,
        mce: d.mce,
        ce: d.ce,
        s_bias: d.s_bias,
        silhouette_acc: d.silhouette_acc,
        d_acc: d.d_acc,
        cliff: d.cliff,
        fim_curve: fim,
        d_acc_curve,
        notes: d.notes,
        ..stored.clone()
    };
    if d.table != table || report != stored {
        return Err(Error::Data(format!("{} does not match a recomputation from its prediction files", eval_dir.join(files::REPORT_JSON).display())));
    }
    Ok(report)
}
