//! Backbones, heads, and the combined encoder network.

pub mod config;
pub mod head;
pub mod resnet;
pub mod vit;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{BackboneKind, EncoderConfig, HeadKind, PatchAttentionSpec, Preset, ResidualConvSpec};
pub use head::{Head, HeadCache};
pub use resnet::{ResidualConvCache, ResidualConvNet};
pub use vit::{PatchAttentionCache, PatchAttentionNet};

use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub enum Backbone {
    ResidualConv(ResidualConvNet),
    PatchAttention(PatchAttentionNet),
}

pub enum BackboneCache {
    ResidualConv(ResidualConvCache),
    PatchAttention(PatchAttentionCache),
}

impl Backbone {
    pub fn forward(&self, x: &Tensor) -> (Tensor, BackboneCache) {
        match self {
            Backbone::ResidualConv(n) => {
                let (y, c) = n.forward(x);
                (y, BackboneCache::ResidualConv(c))
            }
            Backbone::PatchAttention(n) => {
                let (y, c) = n.forward(x);
                (y, BackboneCache::PatchAttention(c))
            }
        }
    }

    pub fn backward(&mut self, cache: &BackboneCache, gy: &Tensor) {
        match (self, cache) {
            (Backbone::ResidualConv(n), BackboneCache::ResidualConv(c)) => n.backward(c, gy),
            (Backbone::PatchAttention(n), BackboneCache::PatchAttention(c)) => n.backward(c, gy),
            _ => panic!("backbone cache does not match backbone kind"),
        }
    }
}

impl Parameterized for Backbone {
    fn params(&self) -> Vec<&Param> {
        match self {
            Backbone::ResidualConv(n) => n.params(),
            Backbone::PatchAttention(n) => n.params(),
        }
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Backbone::ResidualConv(n) => n.params_mut(),
            Backbone::PatchAttention(n) => n.params_mut(),
        }
    }
}

/// Backbone plus training head. Probes read `features`; SSL objectives read the head output.
#[derive(Clone, Debug)]
pub struct Network {
    pub config: EncoderConfig,
    pub backbone: Backbone,
    pub head: Head,
}

pub struct NetworkCache {
    backbone: BackboneCache,
    head: HeadCache,
}

impl Network {
    pub fn new(config: &EncoderConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = match config.backbone {
            BackboneKind::ResidualConv => Backbone::ResidualConv(ResidualConvNet::new(&config.residual_spec(), &mut rng)),
            BackboneKind::PatchAttention => {
                Backbone::PatchAttention(PatchAttentionNet::new(&config.attention_spec(), &mut rng))
            }
        };
        let head = Head::new(config, &mut rng);
        Self { config: config.clone(), backbone, head }
    }

    /// Pooled backbone features `[N, feature_dim]`.
    pub fn features(&self, x: &Tensor) -> Tensor {
        self.backbone.forward(x).0
    }

    /// Features in chunks of at most `chunk` images to bound peak memory.
    pub fn features_chunked(&self, x: &Tensor, chunk: usize) -> Tensor {
        let n = x.rows();
        let parts: Vec<Tensor> =
            (0..n).step_by(chunk.max(1)).map(|s| self.features(&x.slice_rows(s, (s + chunk).min(n)))).collect();
        Tensor::concat_rows(&parts.iter().collect::<Vec<_>>())
    }

    /// Head output `[N, embedding_dim]` plus the cache for `backward`.
    pub fn forward(&self, x: &Tensor) -> (Tensor, NetworkCache) {
        let (f, backbone) = self.backbone.forward(x);
        let (y, head) = self.head.forward(&f);
        (y, NetworkCache { backbone, head })
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        self.forward(x).0
    }

    /// Accumulates parameter gradients for `dL/d(head output) = gy`.
    pub fn backward(&mut self, cache: &NetworkCache, gy: &Tensor) {
        let gf = self.head.backward(&cache.head, gy);
        self.backbone.backward(&cache.backbone, &gf);
    }
}

impl Parameterized for Network {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.backbone.params();
        v.extend(self.head.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.backbone.params_mut();
        v.extend(self.head.params_mut());
        v
    }
}
