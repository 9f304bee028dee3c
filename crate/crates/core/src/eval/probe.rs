//! Linear probe on frozen, standardized encoder features.

use devdiet_nn::{warmup_cosine, AdamW, Param};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{embed, Prediction};
use crate::datasets::LabeledImage;
use crate::error::{Error, Result};
use crate::seed;
use crate::ssl::Encoder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub weight_decay: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { epochs: 50, lr: 1e-3, batch: 64, weight_decay: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub epochs: usize,
    pub train_accuracy: f64,
}

/// Multinomial logistic regression over standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub classes: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Row-major `classes x dim`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub record: ProbeRecord,
}

impl LinearProbe {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    fn raw_logits(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..self.classes)
            .map(|c| self.bias[c] as f64 + self.weight[c * d..(c + 1) * d].iter().zip(z).map(|(&w, v)| w as f64 * v).sum::<f64>())
            .collect()
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        self.raw_logits(&self.standardize(features))
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        argmax(&self.logits(features))
    }

    /// Flips the decision of a two-class probe.
    pub fn inverted(&self) -> LinearProbe {
        let mut p = self.clone();
        p.weight.iter_mut().for_each(|w| *w = -*w);
        p.bias.iter_mut().for_each(|b| *b = -*b);
        p
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fits a probe on precomputed features.
pub fn fit_probe_features(x: &[Vec<f64>], y: &[usize], classes: usize, cfg: &ProbeConfig, rng_seed: u64) -> Result<LinearProbe> {
    if classes < 2 {
        return Err(Error::Argument(format!("a probe needs at least 2 classes, got {classes}")));
    }
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Data(format!("probe training set has {} features and {} labels", x.len(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::Data(format!("label {bad} outside {classes} classes")));
    }
    let missing: Vec<usize> = (0..classes).filter(|c| !y.contains(c)).collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("classes missing from the probe training split: {missing:?}")));
    }
    let d = x[0].len();
    let n = x.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 1e-12 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let mut probe = LinearProbe {
        classes,
        mean,
        scale,
        weight: vec![0.0; classes * d],
        bias: vec![0.0; classes],
        record: ProbeRecord { epochs: cfg.epochs, train_accuracy: 0.0 },
    };
    let z: Vec<Vec<f64>> = x.iter().map(|r| probe.standardize(r)).collect();

    let mut w = Param::zeros("probe.weight", vec![classes, d], true);
    let mut b = Param::zeros("probe.bias", vec![classes], false);
    let mut opt = AdamW::new(cfg.lr as f32, cfg.weight_decay as f32);
    let mut order: Vec<usize> = (0..z.len()).collect();
    let per_epoch = z.len().div_ceil(cfg.batch.max(1));
    let total = per_epoch * cfg.epochs;
    let mut rng = seed::rng_for(rng_seed, &[seed::tag("probe")]);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch.max(1)) {
            w.zero_grad();
            b.zero_grad();
            probe.weight.copy_from_slice(&w.value);
            probe.bias.copy_from_slice(&b.value);
            for &i in chunk {
                let p = softmax(&probe.raw_logits(&z[i]));
                for c in 0..classes {
                    let g = (p[c] - (y[i] == c) as u8 as f64) / chunk.len() as f64;
                    b.grad[c] += g as f32;
                    for (gw, v) in w.grad[c * d..(c + 1) * d].iter_mut().zip(&z[i]) {
                        *gw += (g * v) as f32;
                    }
                }
            }
            opt.lr = warmup_cosine(cfg.lr as f32, step, 0, total);
            opt.step(vec![&mut w, &mut b]);
            step += 1;
        }
    }
    probe.weight = w.value;
    probe.bias = b.value;
    let correct = z.iter().zip(y).filter(|(r, &l)| argmax(&probe.raw_logits(r)) == l).count();
    probe.record.train_accuracy = correct as f64 / z.len() as f64;
    Ok(probe)
}

pub(crate) fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Fits a probe on a frozen encoder's features. The encoder is only read.
pub fn fit_probe<E: Encoder>(encoder: &E, items: &[LabeledImage], classes: usize, cfg: &ProbeConfig, rng_seed: u64) -> Result<LinearProbe> {
    let before = encoder.fingerprint();
    let x = embed(encoder, &items.iter().map(|i| &i.image).collect::<Vec<_>>());
    let probe = fit_probe_features(&x, &items.iter().map(|i| i.label).collect::<Vec<_>>(), classes, cfg, rng_seed)?;
    debug_assert_eq!(before, encoder.fingerprint());
    Ok(probe)
}

/// Predictions for labeled items, logits included.
pub fn predict_items<E: Encoder>(probe: &LinearProbe, encoder: &E, items: &[LabeledImage]) -> Vec<Prediction> {
    let x = embed(encoder, &items.iter().map(|i| &i.image).collect::<Vec<_>>());
    items
        .iter()
        .zip(x)
        .map(|(item, f)| {
            let logits = probe.logits(&f);
            Prediction {
                image_id: item.id.clone(),
                argmax: argmax(&logits),
                logits: Some(logits),
                label: Some(item.label),
                texture_label: item.texture_label,
            }
        })
        .collect()
}
