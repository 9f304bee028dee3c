use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    ResidualConv,
    PatchAttention,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Sized for 64×64 inputs on a single CPU core.
    Desk,
    /// ResNet-18 / ViT-S/16 proportions at 224×224.
    Paper,
}

/// Output head attached to the backbone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Two-layer MLP producing embeddings for the contrastive objective.
    Projection,
    /// MLP + bottleneck + L2 norm + prototype layer for self-distillation.
    Prototype,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualConvSpec {
    pub stem_width: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub stage_widths: Vec<usize>,
    pub stage_strides: Vec<usize>,
    pub blocks_per_stage: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchAttentionSpec {
    pub patch: usize,
    pub dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub backbone: BackboneKind,
    pub preset: Preset,
    /// Output width of the projection head (contrastive) or prototype count (distillation).
    pub embedding_dim: usize,
    pub head: HeadKind,
    pub head_hidden: usize,
    /// Bottleneck width before the prototype layer; unused by the projection head.
    pub head_bottleneck: usize,
}

impl EncoderConfig {
    pub fn new(backbone: BackboneKind, preset: Preset, head: HeadKind) -> Self {
        let (embedding_dim, head_hidden, head_bottleneck) = match (preset, head) {
            (Preset::Desk, HeadKind::Projection) => (64, 128, 0),
            (Preset::Desk, HeadKind::Prototype) => (256, 128, 64),
            (Preset::Paper, HeadKind::Projection) => (128, 2048, 0),
            (Preset::Paper, HeadKind::Prototype) => (65536, 2048, 256),
        };
        Self { backbone, preset, embedding_dim, head, head_hidden, head_bottleneck }
    }

    pub fn residual_spec(&self) -> ResidualConvSpec {
        match self.preset {
            Preset::Desk => ResidualConvSpec {
                stem_width: 16,
                stem_kernel: 3,
                stem_stride: 2,
                stage_widths: vec![16, 32, 64, 128],
                stage_strides: vec![2, 2, 2, 1],
                blocks_per_stage: vec![1, 1, 1, 1],
            },
            Preset::Paper => ResidualConvSpec {
                stem_width: 64,
                stem_kernel: 7,
                stem_stride: 2,
                stage_widths: vec![64, 128, 256, 512],
                stage_strides: vec![2, 2, 2, 2],
                blocks_per_stage: vec![2, 2, 2, 2],
            },
        }
    }

    pub fn attention_spec(&self) -> PatchAttentionSpec {
        match self.preset {
            Preset::Desk => PatchAttentionSpec { patch: 8, dim: 128, depth: 4, heads: 4, mlp_ratio: 2 },
            Preset::Paper => PatchAttentionSpec { patch: 16, dim: 384, depth: 12, heads: 6, mlp_ratio: 4 },
        }
    }

    /// Width of the pooled backbone features consumed by heads and probes.
    pub fn feature_dim(&self) -> usize {
        match self.backbone {
            BackboneKind::ResidualConv => *self.residual_spec().stage_widths.last().expect("stages"),
            BackboneKind::PatchAttention => self.attention_spec().dim,
        }
    }
}
