//! Layers with explicit forward caches and gradient-accumulating backward passes.
//!
//! `forward` returns the output plus whatever the matching `backward` needs, so a
//! module may be run several times (global and local crops) before any backward call.

pub mod activation;
pub mod attention;
pub mod conv;
pub mod linear;
pub mod norm;
pub mod pool;

pub use attention::{AttentionCache, SelfAttention};
pub use conv::{Conv2d, Conv2dCache};
pub use linear::{Linear, LinearCache};
pub use norm::{GroupNorm, GroupNormCache, LayerNorm, LayerNormCache};
