//! Temporal contrastive loss over positive groups, with its analytic gradient.

use serde::{Deserialize, Serialize};

use super::EmbeddingBatch;
use crate::error::{Error, Result};

/// How an anchor's positives combine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `-(1/|P|) sum_p log softmax(p)`.
    #[default]
    MeanOfLogs,
    /// `-log((1/|P|) sum_p softmax(p))`.
    LogOfMean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// `dloss / d(embedding)`, same layout as the batch.
    pub grad: Vec<f64>,
    /// Anchors with at least one positive.
    pub anchors: usize,
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Cosine-similarity contrastive loss with temperature `tau`. Every non-group row is a
/// negative; anchors without positives are skipped.
pub fn contrastive_tdiet_loss(batch: &EmbeddingBatch, tau: f64, aggregation: Aggregation) -> Result<LossOutput> {
    let (n, d) = (batch.rows(), batch.dim);
    if n < 2 {
        return Err(Error::Argument(format!("contrastive loss needs at least 2 rows, got {n}")));
    }
    if !(tau > 0.0) {
        return Err(Error::Argument(format!("temperature must be positive, got {tau}")));
    }
    batch.check_finite()?;

    let norms: Vec<f64> = (0..n).map(|i| batch.row(i).iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12)).collect();
    let z: Vec<f64> = (0..n * d).map(|k| batch.data[k] / norms[k / d]).collect();
    let zr = |i: usize| &z[i * d..(i + 1) * d];
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = zr(i).iter().zip(zr(j)).map(|(a, b)| a * b).sum::<f64>() / tau;
            s[i * n + j] = v;
            s[j * n + i] = v;
        }
    }

    // coef[i][j] = d loss_i / d s_ij, before the 1/M average.
    let mut coef = vec![0.0; n * n];
    let mut total = 0.0;
    let mut anchors = 0usize;
    for i in 0..n {
        let pos: Vec<usize> = (0..n).filter(|&j| j != i && batch.groups[j] == batch.groups[i]).collect();
        if pos.is_empty() {
            continue;
        }
        anchors += 1;
        let others = (0..n).filter(|&a| a != i).map(|a| s[i * n + a]);
        let lse = log_sum_exp(others);
        for a in (0..n).filter(|&a| a != i) {
            coef[i * n + a] = (s[i * n + a] - lse).exp();
        }
        match aggregation {
            Aggregation::MeanOfLogs => {
                let k = pos.len() as f64;
                total += lse - pos.iter().map(|&p| s[i * n + p]).sum::<f64>() / k;
                for &p in &pos {
                    coef[i * n + p] -= 1.0 / k;
                }
            }
            Aggregation::LogOfMean => {
                let lse_p = log_sum_exp(pos.iter().map(|&p| s[i * n + p]));
                total += lse - lse_p + (pos.len() as f64).ln();
                for &p in &pos {
                    coef[i * n + p] -= (s[i * n + p] - lse_p).exp();
                }
            }
        }
    }
    if anchors == 0 {
        log::warn!("contrastive batch has no positive pairs; loss defined as 0");
        return Ok(LossOutput { loss: 0.0, grad: vec![0.0; n * d], anchors });
    }

    let scale = 1.0 / (anchors as f64 * tau);
    let mut gz = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..n {
            let c = (coef[i * n + j] + coef[j * n + i]) * scale;
            if c != 0.0 {
                for k in 0..d {
                    gz[i * d + k] += c * z[j * d + k];
                }
            }
        }
    }
    // Back through the row normalization.
    let mut grad = vec![0.0; n * d];
    for i in 0..n {
        let g = &gz[i * d..(i + 1) * d];
        let dotp: f64 = g.iter().zip(zr(i)).map(|(a, b)| a * b).sum();
        for k in 0..d {
            grad[i * d + k] = (g[k] - z[i * d + k] * dotp) / norms[i];
        }
    }
    Ok(LossOutput { loss: total / anchors as f64, grad, anchors })
}
