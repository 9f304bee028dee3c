//! Small CPU neural-network toolkit: dense `f32` tensors, layers with explicit
//! backward passes, residual-conv and patch-attention backbones, and AdamW.
//!
//! All kernels are single-threaded and run in a fixed order, so identical inputs
//! and parameters give bit-identical outputs and gradients.

pub mod gemm;
pub mod layers;
pub mod model;
pub mod optim;
pub mod param;
pub mod runtime;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use model::{BackboneKind, EncoderConfig, HeadKind, Network, NetworkCache, Preset};
pub use optim::{warmup_cosine, AdamW, AdamWState};
pub use param::{copy_values, ema_blend, flatten_values, Param, Parameterized, StructureMismatch};
pub use tensor::Tensor;
