use rand::Rng;

use super::config::PatchAttentionSpec;
use crate::layers::activation::{gelu, gelu_backward};
use crate::layers::pool::{token_mean, token_mean_backward};
use crate::layers::{AttentionCache, LayerNorm, LayerNormCache, Linear, LinearCache, SelfAttention};
use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
struct Block {
    ln1: LayerNorm,
    attn: SelfAttention,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
}

struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    fc1: LinearCache,
    hidden_pre: Tensor,
    fc2: LinearCache,
}

impl Block {
    fn new<R: Rng>(name: &str, spec: &PatchAttentionSpec, rng: &mut R) -> Self {
        let d = spec.dim;
        Self {
            ln1: LayerNorm::new(&format!("{name}.ln1"), d),
            attn: SelfAttention::new(&format!("{name}.attn"), d, spec.heads, rng),
            ln2: LayerNorm::new(&format!("{name}.ln2"), d),
            fc1: Linear::new_small(&format!("{name}.fc1"), d, d * spec.mlp_ratio, true, rng),
            fc2: Linear::new_small(&format!("{name}.fc2"), d * spec.mlp_ratio, d, true, rng),
        }
    }

    fn forward(&self, x: &Tensor, tokens: usize) -> (Tensor, BlockCache) {
        let (n1, ln1) = self.ln1.forward(x);
        let (a, attn) = self.attn.forward(&n1, tokens);
        let mut x1 = x.clone();
        x1.add_assign(&a);
        let (n2, ln2) = self.ln2.forward(&x1);
        let (hidden_pre, fc1) = self.fc1.forward(&n2);
        let (m, fc2) = self.fc2.forward(&gelu(&hidden_pre));
        x1.add_assign(&m);
        (x1, BlockCache { ln1, attn, ln2, fc1, hidden_pre, fc2 })
    }

    fn backward(&mut self, c: &BlockCache, gy: &Tensor) -> Tensor {
        let gh = self.fc2.backward(&c.fc2, gy, true).expect("input grad");
        let gpre = gelu_backward(&c.hidden_pre, &gh);
        let gn2 = self.fc1.backward(&c.fc1, &gpre, true).expect("input grad");
        let mut gx1 = self.ln2.backward(&c.ln2, &gn2);
        gx1.add_assign(gy);
        let gn1 = self.attn.backward(&c.attn, &gx1);
        let mut gx = self.ln1.backward(&c.ln1, &gn1);
        gx.add_assign(&gx1);
        gx
    }

    fn params(&self) -> Vec<&Param> {
        let mut v = self.ln1.params();
        v.extend(self.attn.params());
        v.extend(self.ln2.params());
        v.extend(self.fc1.params());
        v.extend(self.fc2.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.ln1.params_mut();
        v.extend(self.attn.params_mut());
        v.extend(self.ln2.params_mut());
        v.extend(self.fc1.params_mut());
        v.extend(self.fc2.params_mut());
        v
    }
}

/// Patch-token transformer backbone with fixed 2-D sin-cos position codes,
/// so any input whose sides are multiples of the patch size is accepted.
#[derive(Clone, Debug)]
pub struct PatchAttentionNet {
    spec: PatchAttentionSpec,
    embed: Linear,
    blocks: Vec<Block>,
    norm: LayerNorm,
}

pub struct PatchAttentionCache {
    embed: LinearCache,
    blocks: Vec<BlockCache>,
    norm: LayerNormCache,
    tokens: usize,
}

/// Fixed sin-cos position table `[gh*gw, dim]`.
pub fn sincos_positions(gh: usize, gw: usize, dim: usize) -> Vec<f32> {
    assert!(dim % 4 == 0, "position code width must be divisible by 4");
    let quarter = dim / 4;
    let mut table = vec![0.0f32; gh * gw * dim];
    for y in 0..gh {
        for x in 0..gw {
            let row = &mut table[(y * gw + x) * dim..(y * gw + x + 1) * dim];
            for i in 0..quarter {
                let omega = 1.0 / 10000f32.powf(i as f32 / quarter as f32);
                row[i] = (x as f32 * omega).sin();
                row[quarter + i] = (x as f32 * omega).cos();
                row[2 * quarter + i] = (y as f32 * omega).sin();
                row[3 * quarter + i] = (y as f32 * omega).cos();
            }
        }
    }
    table
}

impl PatchAttentionNet {
    pub fn new<R: Rng>(spec: &PatchAttentionSpec, rng: &mut R) -> Self {
        let patch_len = 3 * spec.patch * spec.patch;
        Self {
            embed: Linear::new("patch_embed", patch_len, spec.dim, true, rng),
            blocks: (0..spec.depth).map(|i| Block::new(&format!("block{i}"), spec, rng)).collect(),
            norm: LayerNorm::new("final_norm", spec.dim),
            spec: spec.clone(),
        }
    }

    fn patchify(&self, x: &Tensor) -> (Tensor, usize, usize) {
        let s = x.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let p = self.spec.patch;
        assert!(h % p == 0 && w % p == 0, "input {h}x{w} not divisible by patch {p}");
        let (gh, gw) = (h / p, w / p);
        let plen = c * p * p;
        let mut out = vec![0.0f32; n * gh * gw * plen];
        for b in 0..n {
            for py in 0..gh {
                for px in 0..gw {
                    let row = &mut out[((b * gh + py) * gw + px) * plen..][..plen];
                    for ci in 0..c {
                        for dy in 0..p {
                            let src = ((b * c + ci) * h + py * p + dy) * w + px * p;
                            row[(ci * p + dy) * p..(ci * p + dy + 1) * p]
                                .copy_from_slice(&x.data()[src..src + p]);
                        }
                    }
                }
            }
        }
        (Tensor::new(vec![n * gh * gw, plen], out), gh, gw)
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, PatchAttentionCache) {
        let (patches, gh, gw) = self.patchify(x);
        let tokens = gh * gw;
        let (mut t, embed) = self.embed.forward(&patches);
        let pos = sincos_positions(gh, gw, self.spec.dim);
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            *v += pos[i % pos.len()];
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&t, tokens);
            blocks.push(c);
            t = y;
        }
        let (normed, norm) = self.norm.forward(&t);
        (token_mean(&normed, tokens), PatchAttentionCache { embed, blocks, norm, tokens })
    }

    pub fn backward(&mut self, c: &PatchAttentionCache, gy: &Tensor) {
        let g = token_mean_backward(gy, c.tokens);
        let mut g = self.norm.backward(&c.norm, &g);
        for (b, bc) in self.blocks.iter_mut().zip(&c.blocks).rev() {
            g = b.backward(bc, &g);
        }
        self.embed.backward(&c.embed, &g, false);
    }
}

impl Parameterized for PatchAttentionNet {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.embed.params();
        for b in &self.blocks {
            v.extend(b.params());
        }
        v.extend(self.norm.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.embed.params_mut();
        for b in &mut self.blocks {
            v.extend(b.params_mut());
        }
        v.extend(self.norm.params_mut());
        v
    }
}
