//! Frozen-encoder evaluation: linear probes, prediction files, and the metric suite.

pub mod metrics;
pub mod plot;
pub mod probe;
pub mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::image::Image;
use crate::ssl::encoder::to_input;
use crate::ssl::Encoder;

pub use metrics::{
    corruption_errors, depth_accuracy, depth_curve, errors_from_predictions, mce, shape_bias, visual_cliff_table, CliffRow, CliffTable,
    CurvePoint, DenominatorPolicy, ErrorTable, MceResult,
};
pub use probe::{argmax, fit_probe, fit_probe_features, predict_items, LinearProbe, ProbeConfig};
pub use report::EvalReport;

/// One line of a prediction file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<f64>>,
    pub argmax: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture_label: Option<usize>,
}

/// Encoder features for images of one size, in chunks of 64.
pub fn embed<E: Encoder>(encoder: &E, images: &[&Image]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(64) {
        let f = encoder.features(&to_input(chunk));
        out.extend((0..f.rows()).map(|i| f.row(i).iter().map(|&v| v as f64).collect()));
    }
    out
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut buf = Vec::new();
    for p in preds {
        serde_json::to_writer(&mut buf, p)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::ingest(path, format!("line {}: {e}", n + 1))))
        .collect()
}

/// Fraction of labeled predictions whose argmax equals the label.
pub fn top1(preds: &[Prediction]) -> Result<f64> {
    let labeled: Vec<_> = preds.iter().filter_map(|p| p.label.map(|l| (p.argmax, l))).collect();
    if labeled.is_empty() {
        return Err(Error::UndefinedMetric("accuracy over zero labeled predictions".into()));
    }
    Ok(labeled.iter().filter(|(a, l)| a == l).count() as f64 / labeled.len() as f64)
}
