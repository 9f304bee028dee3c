use rand::Rng;

use super::config::ResidualConvSpec;
use crate::layers::activation::{relu, relu_backward};
use crate::layers::pool::{global_avg_pool, global_avg_pool_backward};
use crate::layers::{Conv2d, Conv2dCache, GroupNorm, GroupNormCache};
use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
struct ConvNorm {
    conv: Conv2d,
    norm: GroupNorm,
}

struct ConvNormCache {
    conv: Conv2dCache,
    norm: GroupNormCache,
}

impl ConvNorm {
    #[allow(clippy::too_many_arguments)]
    fn new<R: Rng>(name: &str, cin: usize, cout: usize, k: usize, stride: usize, rng: &mut R) -> Self {
        Self {
            conv: Conv2d::new(&format!("{name}.conv"), cin, cout, k, stride, k / 2, false, rng),
            norm: GroupNorm::new(&format!("{name}.norm"), GroupNorm::default_groups(cout), cout),
        }
    }

    fn forward(&self, x: &Tensor) -> (Tensor, ConvNormCache) {
        let (h, conv) = self.conv.forward(x);
        let (y, norm) = self.norm.forward(&h);
        (y, ConvNormCache { conv, norm })
    }

    fn backward(&mut self, c: &ConvNormCache, gy: &Tensor, input_grad: bool) -> Option<Tensor> {
        let gh = self.norm.backward(&c.norm, gy);
        self.conv.backward(&c.conv, &gh, input_grad)
    }

    fn params(&self) -> Vec<&Param> {
        let mut v = self.conv.params();
        v.extend(self.norm.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.conv.params_mut();
        v.extend(self.norm.params_mut());
        v
    }
}

/// Pre-activation-free basic residual block: conv-norm-relu-conv-norm (+ shortcut) -relu.
#[derive(Clone, Debug)]
struct BasicBlock {
    a: ConvNorm,
    b: ConvNorm,
    shortcut: Option<ConvNorm>,
}

struct BlockCache {
    a: ConvNormCache,
    a_out: Tensor,
    b: ConvNormCache,
    shortcut: Option<ConvNormCache>,
    out: Tensor,
}

impl BasicBlock {
    fn new<R: Rng>(name: &str, cin: usize, cout: usize, stride: usize, rng: &mut R) -> Self {
        let shortcut =
            (stride != 1 || cin != cout).then(|| ConvNorm::new(&format!("{name}.down"), cin, cout, 1, stride, rng));
        let mut b = ConvNorm::new(&format!("{name}.b"), cout, cout, 3, 1, rng);
        // Start each residual branch near identity.
        b.norm.gamma.value.fill(0.5);
        Self { a: ConvNorm::new(&format!("{name}.a"), cin, cout, 3, stride, rng), b, shortcut }
    }

    fn forward(&self, x: &Tensor) -> (Tensor, BlockCache) {
        let (h, a) = self.a.forward(x);
        let a_out = relu(&h);
        let (mut y, b) = self.b.forward(&a_out);
        let shortcut = match &self.shortcut {
            Some(s) => {
                let (sx, c) = s.forward(x);
                y.add_assign(&sx);
                Some(c)
            }
            None => {
                y.add_assign(x);
                None
            }
        };
        let out = relu(&y);
        (out.clone(), BlockCache { a, a_out, b, shortcut, out })
    }

    fn backward(&mut self, c: &BlockCache, gy: &Tensor, input_grad: bool) -> Option<Tensor> {
        let gsum = relu_backward(&c.out, gy);
        let ga_out = self.b.backward(&c.b, &gsum, true).expect("input grad");
        let gh = relu_backward(&c.a_out, &ga_out);
        let gx_main = self.a.backward(&c.a, &gh, input_grad);
        let gx_skip = match (&mut self.shortcut, &c.shortcut) {
            (Some(s), Some(sc)) => s.backward(sc, &gsum, input_grad),
            _ => input_grad.then(|| gsum.clone()),
        };
        match (gx_main, gx_skip) {
            (Some(mut a), Some(b)) => {
                a.add_assign(&b);
                Some(a)
            }
            _ => None,
        }
    }

    fn params(&self) -> Vec<&Param> {
        let mut v = self.a.params();
        v.extend(self.b.params());
        if let Some(s) = &self.shortcut {
            v.extend(s.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.a.params_mut();
        v.extend(self.b.params_mut());
        if let Some(s) = &mut self.shortcut {
            v.extend(s.params_mut());
        }
        v
    }
}

/// Residual convolutional backbone ending in global average pooling.
#[derive(Clone, Debug)]
pub struct ResidualConvNet {
    stem: ConvNorm,
    blocks: Vec<BasicBlock>,
}

pub struct ResidualConvCache {
    stem: ConvNormCache,
    stem_out: Tensor,
    blocks: Vec<BlockCache>,
    pooled_shape: Vec<usize>,
}

impl ResidualConvNet {
    pub fn new<R: Rng>(spec: &ResidualConvSpec, rng: &mut R) -> Self {
        let stem = ConvNorm::new("stem", 3, spec.stem_width, spec.stem_kernel, spec.stem_stride, rng);
        let mut blocks = Vec::new();
        let mut cin = spec.stem_width;
        for (si, ((&w, &s), &n)) in spec
            .stage_widths
            .iter()
            .zip(&spec.stage_strides)
            .zip(&spec.blocks_per_stage)
            .enumerate()
        {
            for bi in 0..n {
                let stride = if bi == 0 { s } else { 1 };
                blocks.push(BasicBlock::new(&format!("stage{si}.block{bi}"), cin, w, stride, rng));
                cin = w;
            }
        }
        Self { stem, blocks }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, ResidualConvCache) {
        let (h, stem) = self.stem.forward(x);
        let stem_out = relu(&h);
        let mut cur = stem_out.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&cur);
            blocks.push(c);
            cur = y;
        }
        let pooled_shape = cur.shape().to_vec();
        (global_avg_pool(&cur), ResidualConvCache { stem, stem_out, blocks, pooled_shape })
    }

    pub fn backward(&mut self, c: &ResidualConvCache, gy: &Tensor) {
        let mut g = global_avg_pool_backward(&c.pooled_shape, gy);
        for (b, bc) in self.blocks.iter_mut().zip(&c.blocks).rev() {
            g = b.backward(bc, &g, true).expect("input grad");
        }
        let gh = relu_backward(&c.stem_out, &g);
        self.stem.backward(&c.stem, &gh, false);
    }
}

impl Parameterized for ResidualConvNet {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.stem.params();
        for b in &self.blocks {
            v.extend(b.params());
        }
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.stem.params_mut();
        for b in &mut self.blocks {
            v.extend(b.params_mut());
        }
        v
    }
}
