use rand::Rng;

use super::linear::{Linear, LinearCache};
use crate::gemm::sgemm_strided;
use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

/// Multi-head self-attention over `[B*T, D]` token matrices.
#[derive(Clone, Debug)]
pub struct SelfAttention {
    pub qkv: Linear,
    pub proj: Linear,
    heads: usize,
    dim: usize,
}

#[derive(Debug)]
pub struct AttentionCache {
    qkv_cache: LinearCache,
    qkv: Tensor,
    probs: Vec<f32>,
    proj_cache: LinearCache,
    batch: usize,
    tokens: usize,
}

impl SelfAttention {
    pub fn new<R: Rng>(name: &str, dim: usize, heads: usize, rng: &mut R) -> Self {
        assert!(dim % heads == 0, "dim {dim} not divisible by {heads} heads");
        Self {
            qkv: Linear::new_small(&format!("{name}.qkv"), dim, 3 * dim, true, rng),
            proj: Linear::new_small(&format!("{name}.proj"), dim, dim, true, rng),
            heads,
            dim,
        }
    }

    pub fn forward(&self, x: &Tensor, tokens: usize) -> (Tensor, AttentionCache) {
        let (d, h) = (self.dim, self.heads);
        let dh = d / h;
        let batch = x.rows() / tokens;
        let scale = 1.0 / (dh as f32).sqrt();
        let (qkv, qkv_cache) = self.qkv.forward(x);
        let q3 = qkv.data();
        let mut probs = vec![0.0f32; batch * h * tokens * tokens];
        let mut mixed = vec![0.0f32; batch * tokens * d];
        for b in 0..batch {
            let base = b * tokens * 3 * d;
            for hi in 0..h {
                let q = &q3[base + hi * dh..];
                let k = &q3[base + d + hi * dh..];
                let v = &q3[base + 2 * d + hi * dh..];
                let p = &mut probs[(b * h + hi) * tokens * tokens..(b * h + hi + 1) * tokens * tokens];
                sgemm_strided(tokens, dh, tokens, q, (3 * d, 1), k, (1, 3 * d), 0.0, p, (tokens, 1));
                for row in p.chunks_mut(tokens) {
                    let mx = row.iter().fold(f32::NEG_INFINITY, |a, &v| a.max(v * scale));
                    let mut sum = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v * scale - mx).exp();
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
                let out = &mut mixed[b * tokens * d + hi * dh..];
                sgemm_strided(tokens, tokens, dh, p, (tokens, 1), v, (3 * d, 1), 0.0, out, (d, 1));
            }
        }
        let mixed = Tensor::new(vec![batch * tokens, d], mixed);
        let (y, proj_cache) = self.proj.forward(&mixed);
        (y, AttentionCache { qkv_cache, qkv, probs, proj_cache, batch, tokens })
    }

    pub fn backward(&mut self, cache: &AttentionCache, gy: &Tensor) -> Tensor {
        let (d, h, t) = (self.dim, self.heads, cache.tokens);
        let dh = d / h;
        let scale = 1.0 / (dh as f32).sqrt();
        let gmixed = self.proj.backward(&cache.proj_cache, gy, true).expect("input grad");
        let q3 = cache.qkv.data();
        let mut gqkv = vec![0.0f32; cache.batch * t * 3 * d];
        let mut gp = vec![0.0f32; t * t];
        for b in 0..cache.batch {
            let base = b * t * 3 * d;
            for hi in 0..h {
                let p = &cache.probs[(b * h + hi) * t * t..(b * h + hi + 1) * t * t];
                let go = &gmixed.data()[b * t * d + hi * dh..];
                let q = &q3[base + hi * dh..];
                let k = &q3[base + d + hi * dh..];
                let v = &q3[base + 2 * d + hi * dh..];
                // dP = dO V^T ; dV = P^T dO
                sgemm_strided(t, dh, t, go, (d, 1), v, (1, 3 * d), 0.0, &mut gp, (t, 1));
                sgemm_strided(t, t, dh, p, (1, t), go, (d, 1), 0.0, &mut gqkv[base + 2 * d + hi * dh..], (3 * d, 1));
                for (prow, grow) in p.chunks(t).zip(gp.chunks_mut(t)) {
                    let dot: f32 = prow.iter().zip(grow.iter()).map(|(a, b)| a * b).sum();
                    for (g, &pv) in grow.iter_mut().zip(prow) {
                        *g = pv * (*g - dot) * scale;
                    }
                }
                // dQ = dS K ; dK = dS^T Q
                sgemm_strided(t, t, dh, &gp, (t, 1), k, (3 * d, 1), 0.0, &mut gqkv[base + hi * dh..], (3 * d, 1));
                sgemm_strided(t, t, dh, &gp, (1, t), q, (3 * d, 1), 0.0, &mut gqkv[base + d + hi * dh..], (3 * d, 1));
            }
        }
        let gqkv = Tensor::new(vec![cache.batch * t, 3 * d], gqkv);
        self.qkv.backward(&cache.qkv_cache, &gqkv, true).expect("input grad")
    }
}

impl Parameterized for SelfAttention {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.qkv.params();
        v.extend(self.proj.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.qkv.params_mut();
        v.extend(self.proj.params_mut());
        v
    }
}
