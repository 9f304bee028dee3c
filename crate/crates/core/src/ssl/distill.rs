//! Temporal self-distillation: teacher global views supervise every other view of the
//! same positive group through softmax targets over prototype logits.

use std::collections::BTreeSet;

use devdiet_nn::{ema_blend, Parameterized};

use super::EmbeddingBatch;
use crate::augment::ViewKind;
use crate::error::{Error, Result};

pub const CENTER_MOMENTUM: f64 = 0.9;
pub const STUDENT_TEMPERATURE: f64 = 0.1;
pub const TEACHER_TEMPERATURE: f64 = 0.04;
pub const TEACHER_MOMENTUM: f64 = 0.996;

#[derive(Clone, Debug, PartialEq)]
pub struct DistillOutput {
    pub loss: f64,
    /// `dloss / d(student logits)`.
    pub grad: Vec<f64>,
    pub center: Vec<f64>,
    pub pairs: usize,
}

fn softmax(logits: &[f64], shift: &[f64], tau: f64) -> Vec<f64> {
    let z: Vec<f64> = logits.iter().zip(shift).map(|(l, c)| (l - c) / tau).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy over ordered (teacher global, student view) pairs that share a
/// group and are different views. Teacher targets are constants. The returned center is
/// the EMA of the teacher logits.
pub fn distillation_tdiet_loss(
    student: &EmbeddingBatch,
    teacher: &EmbeddingBatch,
    tau_s: f64,
    tau_t: f64,
    center: &[f64],
) -> Result<DistillOutput> {
    let k = student.dim;
    if teacher.dim != k || center.len() != k {
        return Err(Error::Argument(format!("logit widths differ: student {k}, teacher {}, center {}", teacher.dim, center.len())));
    }
    if !(tau_s > 0.0 && tau_t > 0.0) {
        return Err(Error::Argument("temperatures must be positive".into()));
    }
    if teacher.kinds.iter().any(|&v| v != ViewKind::Global) {
        return Err(Error::Argument("teacher rows must be global views".into()));
    }
    student.check_finite()?;
    teacher.check_finite()?;

    let targets: Vec<Vec<f64>> = (0..teacher.rows()).map(|t| softmax(teacher.row(t), center, tau_t)).collect();
    let zero = vec![0.0; k];
    let log_q: Vec<Vec<f64>> =
        (0..student.rows()).map(|s| softmax(student.row(s), &zero, tau_s).into_iter().map(|p| p.max(1e-300).ln()).collect()).collect();

    let covered: BTreeSet<usize> = teacher.groups.iter().copied().collect();
    for g in student.groups.iter().collect::<BTreeSet<_>>() {
        if !covered.contains(g) {
            log::warn!("group {g} has no teacher global view; skipped");
        }
    }

    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut grad = vec![0.0; student.rows() * k];
    for t in 0..teacher.rows() {
        for s in 0..student.rows() {
            if student.groups[s] != teacher.groups[t] || student.view_ids[s] == teacher.view_ids[t] {
                continue;
            }
            pairs += 1;
            total -= targets[t].iter().zip(&log_q[s]).map(|(p, l)| p * l).sum::<f64>();
            for c in 0..k {
                grad[s * k + c] += (log_q[s][c].exp() - targets[t][c]) / tau_s;
            }
        }
    }
    let mut new_center = center.to_vec();
    if teacher.rows() > 0 {
        for (c, v) in new_center.iter_mut().enumerate() {
            let mean = (0..teacher.rows()).map(|t| teacher.row(t)[c]).sum::<f64>() / teacher.rows() as f64;
            *v = CENTER_MOMENTUM * *v + (1.0 - CENTER_MOMENTUM) * mean;
        }
    }
    if pairs == 0 {
        log::warn!("distillation batch has no teacher/student pairs; loss defined as 0");
        return Ok(DistillOutput { loss: 0.0, grad, center: new_center, pairs });
    }
    let inv = 1.0 / pairs as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok(DistillOutput { loss: total * inv, grad, center: new_center, pairs })
}

/// Cosine ramp from `base` at step 0 toward 1 at `total` steps.
pub fn momentum_at(step: u64, total: u64, base: f64) -> f64 {
    if total == 0 {
        return base;
    }
    let t = (step.min(total) as f64 / total as f64) * std::f64::consts::PI;
    1.0 - (1.0 - base) * (t.cos() + 1.0) / 2.0
}

/// `teacher = m * teacher + (1 - m) * student`, parameterwise.
pub fn ema_update<T: Parameterized + ?Sized, S: Parameterized + ?Sized>(teacher: &mut T, student: &S, m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Argument(format!("momentum {m} outside [0, 1]")));
    }
    Ok(ema_blend(teacher, student, m as f32)?)
}
