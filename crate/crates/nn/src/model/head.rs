use rand::Rng;

use super::config::{EncoderConfig, HeadKind};
use crate::layers::activation::{gelu, gelu_backward, l2_normalize_backward, l2_normalize_rows, relu, relu_backward};
use crate::layers::{Linear, LinearCache};
use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub enum Head {
    /// `fc1 -> relu -> fc2`.
    Projection { fc1: Linear, fc2: Linear },
    /// `fc1 -> gelu -> fc2 -> gelu -> bottleneck -> l2 -> prototypes`.
    Prototype { fc1: Linear, fc2: Linear, bottleneck: Linear, prototypes: Linear },
}

pub enum HeadCache {
    Projection { fc1: LinearCache, hidden: Tensor, fc2: LinearCache },
    Prototype {
        fc1: LinearCache,
        pre1: Tensor,
        fc2: LinearCache,
        pre2: Tensor,
        bottleneck: LinearCache,
        normed: Tensor,
        norms: Vec<f32>,
        prototypes: LinearCache,
    },
}

impl Head {
    pub fn new<R: Rng>(cfg: &EncoderConfig, rng: &mut R) -> Self {
        let f = cfg.feature_dim();
        match cfg.head {
            HeadKind::Projection => Head::Projection {
                fc1: Linear::new("head.fc1", f, cfg.head_hidden, true, rng),
                fc2: Linear::new("head.fc2", cfg.head_hidden, cfg.embedding_dim, true, rng),
            },
            HeadKind::Prototype => Head::Prototype {
                fc1: Linear::new("head.fc1", f, cfg.head_hidden, true, rng),
                fc2: Linear::new("head.fc2", cfg.head_hidden, cfg.head_hidden, true, rng),
                bottleneck: Linear::new("head.bottleneck", cfg.head_hidden, cfg.head_bottleneck, true, rng),
                prototypes: Linear::new("head.prototypes", cfg.head_bottleneck, cfg.embedding_dim, false, rng),
            },
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, HeadCache) {
        match self {
            Head::Projection { fc1, fc2 } => {
                let (h, c1) = fc1.forward(x);
                let hidden = relu(&h);
                let (y, c2) = fc2.forward(&hidden);
                (y, HeadCache::Projection { fc1: c1, hidden, fc2: c2 })
            }
            Head::Prototype { fc1, fc2, bottleneck, prototypes } => {
                let (pre1, c1) = fc1.forward(x);
                let (pre2, c2) = fc2.forward(&gelu(&pre1));
                let (z, cb) = bottleneck.forward(&gelu(&pre2));
                let (normed, norms) = l2_normalize_rows(&z);
                let (y, cp) = prototypes.forward(&normed);
                (
                    y,
                    HeadCache::Prototype {
                        fc1: c1,
                        pre1,
                        fc2: c2,
                        pre2,
                        bottleneck: cb,
                        normed,
                        norms,
                        prototypes: cp,
                    },
                )
            }
        }
    }

    pub fn backward(&mut self, cache: &HeadCache, gy: &Tensor) -> Tensor {
        match (self, cache) {
            (Head::Projection { fc1, fc2 }, HeadCache::Projection { fc1: c1, hidden, fc2: c2 }) => {
                let gh = fc2.backward(c2, gy, true).expect("input grad");
                fc1.backward(c1, &relu_backward(hidden, &gh), true).expect("input grad")
            }
            (
                Head::Prototype { fc1, fc2, bottleneck, prototypes },
                HeadCache::Prototype { fc1: c1, pre1, fc2: c2, pre2, bottleneck: cb, normed, norms, prototypes: cp },
            ) => {
                let gn = prototypes.backward(cp, gy, true).expect("input grad");
                let gz = l2_normalize_backward(normed, norms, &gn);
                let g2 = bottleneck.backward(cb, &gz, true).expect("input grad");
                let g1 = fc2.backward(c2, &gelu_backward(pre2, &g2), true).expect("input grad");
                fc1.backward(c1, &gelu_backward(pre1, &g1), true).expect("input grad")
            }
            _ => panic!("head cache does not match head kind"),
        }
    }
}

impl Parameterized for Head {
    fn params(&self) -> Vec<&Param> {
        match self {
            Head::Projection { fc1, fc2 } => [fc1.params(), fc2.params()].concat(),
            Head::Prototype { fc1, fc2, bottleneck, prototypes } => {
                [fc1.params(), fc2.params(), bottleneck.params(), prototypes.params()].concat()
            }
        }
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Head::Projection { fc1, fc2 } => {
                let mut v = fc1.params_mut();
                v.extend(fc2.params_mut());
                v
            }
            Head::Prototype { fc1, fc2, bottleneck, prototypes } => {
                let mut v = fc1.params_mut();
                v.extend(fc2.params_mut());
                v.extend(bottleneck.params_mut());
                v.extend(prototypes.params_mut());
                v
            }
        }
    }
}
