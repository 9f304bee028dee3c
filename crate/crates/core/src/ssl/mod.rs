//! Self-supervised objectives and training: the temporal contrastive loss, temporal
//! self-distillation with an EMA teacher, Fisher-trace probing, the two-phase trainer,
//! and checkpoints.

pub mod checkpoint;
pub mod contrastive;
pub mod distill;
pub mod encoder;
pub mod fim;
pub mod trainer;

use crate::augment::ViewKind;
use crate::error::{Error, Result};

pub use contrastive::{contrastive_tdiet_loss, Aggregation, LossOutput};
pub use distill::{distillation_tdiet_loss, ema_update, momentum_at, DistillOutput};
pub use encoder::{Encoder, PooledLinear};
pub use fim::fim_trace;
pub use trainer::{MetricsRow, TrainBatch, TrainConfig, Trainer};

/// Row-major embeddings with their positive-set structure.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBatch {
    pub dim: usize,
    pub data: Vec<f64>,
    /// Positive group of each row.
    pub groups: Vec<usize>,
    pub kinds: Vec<ViewKind>,
    /// Identity of the augmented view a row came from; a teacher row and a student row
    /// with the same id are the same view.
    pub view_ids: Vec<usize>,
}

impl EmbeddingBatch {
    pub fn new(dim: usize, data: Vec<f64>, groups: Vec<usize>, kinds: Vec<ViewKind>, view_ids: Vec<usize>) -> Result<Self> {
        let n = groups.len();
        if dim == 0 || data.len() != n * dim || kinds.len() != n || view_ids.len() != n {
            return Err(Error::Argument(format!(
                "embedding batch shape: {} values, {n} groups, {} kinds, {} view ids, dim {dim}",
                data.len(),
                kinds.len(),
                view_ids.len()
            )));
        }
        Ok(Self { dim, data, groups, kinds, view_ids })
    }

    /// All-global batch with row `i` as view `i`.
    pub fn simple(dim: usize, data: Vec<f64>, groups: Vec<usize>) -> Result<Self> {
        let n = groups.len();
        Self::new(dim, data, groups, vec![ViewKind::Global; n], (0..n).collect())
    }

    pub fn rows(&self) -> usize {
        self.groups.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite embedding in row {}", i / self.dim)));
        }
        Ok(())
    }
}
