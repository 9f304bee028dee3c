//! Corruption error tables and mCE, shape bias, depth accuracy, and the visual-cliff table.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::probe::{fit_probe, predict_items, LinearProbe, ProbeConfig};
use super::{embed, top1, Prediction};
use crate::corruptions::{CorruptionRecord, CorruptionType};
use crate::datasets::{DepthAnswer, ImageDataset, LabeledImage};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::ssl::Encoder;

/// Top-1 error per (corruption type, severity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub dataset: String,
    pub model: String,
    pub cells: BTreeMap<CorruptionType, BTreeMap<u8, f64>>,
}

impl ErrorTable {
    pub fn new(dataset: impl Into<String>, model: impl Into<String>) -> Self {
        Self { dataset: dataset.into(), model: model.into(), cells: BTreeMap::new() }
    }

    pub fn set(&mut self, kind: CorruptionType, severity: u8, error: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&error) {
            return Err(Error::Argument(format!("error rate {error} for {kind} s{severity} outside [0, 1]")));
        }
        self.cells.entry(kind).or_default().insert(severity, error);
        Ok(())
    }

    pub fn get(&self, kind: CorruptionType, severity: u8) -> Option<f64> {
        self.cells.get(&kind)?.get(&severity).copied()
    }

    pub fn type_sum(&self, kind: CorruptionType) -> f64 {
        self.cells.get(&kind).map_or(0.0, |row| row.values().sum())
    }

    /// `(type, severities)` layout, for shape comparisons.
    pub fn shape(&self) -> Vec<(CorruptionType, Vec<u8>)> {
        self.cells.iter().map(|(t, row)| (*t, row.keys().copied().collect())).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: ErrorTable = serde_json::from_str(text)?;
        for (k, row) in &t.cells {
            if let Some((s, e)) = row.iter().find(|(_, e)| !(0.0..=1.0).contains(*e)) {
                return Err(Error::Data(format!("error table cell {k} s{s} = {e} outside [0, 1]")));
            }
        }
        Ok(t)
    }
}

/// Builds a table from per-cell predictions; every declared cell must be present.
pub fn errors_from_predictions(
    dataset: &str,
    model: &str,
    cells: &[(CorruptionType, u8, Vec<Prediction>)],
    types: &[CorruptionType],
    severities: &[u8],
) -> Result<ErrorTable> {
    let mut table = ErrorTable::new(dataset, model);
    for &t in types {
        for &s in severities {
            let preds = cells
                .iter()
                .find(|(ct, cs, p)| *ct == t && *cs == s && !p.is_empty())
                .ok_or_else(|| Error::IncompleteGrid(format!("{t} severity {s}")))?;
            table.set(t, s, 1.0 - top1(&preds.2)?)?;
        }
    }
    Ok(table)
}

/// Classifies every corrupted image and tabulates the error per declared cell.
/// `labels` maps source image ids to class labels.
#[allow(clippy::too_many_arguments)]
pub fn corruption_errors<E: Encoder>(
    probe: &LinearProbe,
    encoder: &E,
    records: &[CorruptionRecord],
    images: &[Image],
    labels: &HashMap<String, usize>,
    types: &[CorruptionType],
    severities: &[u8],
    names: (&str, &str),
) -> Result<(ErrorTable, Vec<(CorruptionType, u8, Vec<Prediction>)>)> {
    let mut by_cell: BTreeMap<(CorruptionType, u8), Vec<LabeledImage>> = BTreeMap::new();
    for (rec, img) in records.iter().zip(images) {
        let label = *labels.get(&rec.image_id).ok_or_else(|| Error::Data(format!("no label for corrupted image `{}`", rec.image_id)))?;
        by_cell.entry((rec.kind, rec.severity)).or_default().push(LabeledImage {
            id: format!("{}@{}/{}", rec.image_id, rec.kind, rec.severity),
            image: img.clone(),
            label,
            texture_label: None,
        });
    }
    let cells: Vec<_> = by_cell
        .into_iter()
        .filter(|((t, s), _)| types.contains(t) && severities.contains(s))
        .map(|((t, s), items)| (t, s, predict_items(probe, encoder, &items)))
        .collect();
    let table = errors_from_predictions(names.0, names.1, &cells, types, severities)?;
    Ok((table, cells))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MceResult {
    /// Mean corruption error in percent.
    pub mce: f64,
    pub ce: BTreeMap<CorruptionType, f64>,
}

/// Per-type error sums normalized by the baseline's, averaged over types.
pub fn mce(model: &ErrorTable, baseline: &ErrorTable) -> Result<MceResult> {
    if model.shape() != baseline.shape() {
        return Err(Error::Argument(format!(
            "error grids differ: model {} covers {:?}, baseline {} covers {:?}",
            model.model,
            model.shape(),
            baseline.model,
            baseline.shape()
        )));
    }
    if model.cells.is_empty() {
        return Err(Error::UndefinedMetric("mCE over an empty error grid".into()));
    }
    let mut ce = BTreeMap::new();
    for &t in model.cells.keys() {
        let denom = baseline.type_sum(t);
        if denom <= 0.0 {
            return Err(Error::UndefinedMetric(format!("baseline `{}` has zero total error for {t}", baseline.model)));
        }
        ce.insert(t, model.type_sum(t) / denom);
    }
    let mce = 100.0 * ce.values().sum::<f64>() / ce.len() as f64;
    Ok(MceResult { mce, ce })
}

/// Which images count toward the shape-bias denominator.
#[derive(Clone, Debug, PartialEq)]
pub enum DenominatorPolicy {
    /// Images this model classifies as either cue.
    PerModel,
    /// Images any model of the group classifies as either cue; each entry is one model's
    /// predictions, aligned with the labels.
    Union(Vec<Vec<usize>>),
}

/// Fraction of cue-consistent predictions that follow shape.
pub fn shape_bias(preds: &[usize], shape: &[usize], texture: &[usize], policy: &DenominatorPolicy) -> Result<f64> {
    if preds.len() != shape.len() || shape.len() != texture.len() {
        return Err(Error::Argument("prediction and label lists differ in length".into()));
    }
    if let Some(i) = shape.iter().zip(texture).position(|(s, t)| s == t) {
        return Err(Error::Argument(format!("image {i} has the same shape and texture label")));
    }
    let consistent = |p: &[usize], i: usize| p[i] == shape[i] || p[i] == texture[i];
    let denominator: Vec<usize> = match policy {
        DenominatorPolicy::PerModel => (0..preds.len()).filter(|&i| consistent(preds, i)).collect(),
        DenominatorPolicy::Union(group) => {
            if group.iter().any(|g| g.len() != preds.len()) {
                return Err(Error::Argument("model group predictions differ in length".into()));
            }
            (0..preds.len()).filter(|&i| consistent(preds, i) || group.iter().any(|g| consistent(g, i))).collect()
        }
    };
    if denominator.is_empty() {
        return Err(Error::UndefinedMetric("shape bias: no prediction matches either cue".into()));
    }
    Ok(denominator.iter().filter(|&&i| preds[i] == shape[i]).count() as f64 / denominator.len() as f64)
}

/// Binary accuracy on a depth-order set, with its predictions.
pub fn depth_accuracy<E: Encoder>(probe: &LinearProbe, encoder: &E, data: &ImageDataset) -> Result<(f64, Vec<Prediction>)> {
    let preds = predict_items(probe, encoder, &data.items);
    Ok((top1(&preds)?, preds))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: u32,
    pub value: f64,
}

/// Depth accuracy per checkpoint: a fresh probe on `train`, scored on `test`.
pub fn depth_curve<E: Encoder>(
    checkpoints: impl IntoIterator<Item = Result<(u32, E)>>,
    train: &ImageDataset,
    test: &ImageDataset,
    cfg: &ProbeConfig,
    rng_seed: u64,
) -> Result<Vec<CurvePoint>> {
    let mut out: Vec<CurvePoint> = Vec::new();
    for item in checkpoints {
        let (epoch, enc) = item?;
        if out.last().is_some_and(|p| p.epoch >= epoch) {
            return Err(Error::Argument(format!("checkpoint epochs must increase; {epoch} follows {}", out.last().map_or(0, |p| p.epoch))));
        }
        let probe = fit_probe(&enc, &train.items, 2, cfg, rng_seed)?;
        out.push(CurvePoint { epoch, value: depth_accuracy(&probe, &enc, test)?.0 });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffRow {
    pub view: usize,
    pub answer: DepthAnswer,
    pub truth: DepthAnswer,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffTable {
    pub rows: Vec<CliffRow>,
    pub all_correct: bool,
}

impl CliffTable {
    pub fn markdown_header(views: usize) -> String {
        let cols: String = (1..=views).map(|v| format!(" view {v} |")).collect();
        format!("| model |{cols} all correct |\n|---|{}---|\n", "---|".repeat(views))
    }

    /// One row: the model's answer per view, in view order.
    pub fn markdown_row(&self, model: &str) -> String {
        let cells: String = self
            .rows
            .iter()
            .map(|r| format!(" {}{} |", if r.answer == DepthAnswer::Yes { "yes" } else { "no" }, if r.correct { "" } else { " (x)" }))
            .collect();
        format!("| {model} |{cells} {} |\n", if self.all_correct { "yes" } else { "no" })
    }
}

/// Asks the depth probe about each cliff view.
pub fn visual_cliff_table<E: Encoder>(probe: &LinearProbe, encoder: &E, views: &[(Image, DepthAnswer)]) -> Result<CliffTable> {
    if views.is_empty() {
        return Err(Error::Data("no visual-cliff views".into()));
    }
    let feats = embed(encoder, &views.iter().map(|v| &v.0).collect::<Vec<_>>());
    let rows: Vec<CliffRow> = views
        .iter()
        .zip(feats)
        .enumerate()
        .map(|(i, ((_, truth), f))| {
            let answer = if probe.predict(&f) == DepthAnswer::Yes.index() { DepthAnswer::Yes } else { DepthAnswer::No };
            CliffRow { view: i + 1, answer, truth: *truth, correct: answer == *truth }
        })
        .collect();
    let all_correct = rows.iter().all(|r| r.correct);
    Ok(CliffTable { rows, all_correct })
}
