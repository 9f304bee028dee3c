//! The encoder interface the trainer and probes consume, its network implementation,
//! and a pooled-linear stand-in for fast pipeline tests.

use devdiet_nn::{Network, NetworkCache, Param, Parameterized, Tensor};
use rand::Rng as _;

use crate::image::Image;
use crate::seed;

/// Pixel standardization applied to every network input.
pub const INPUT_MEAN: f32 = 0.5;
pub const INPUT_STD: f32 = 0.25;

/// Stacks images of one size into `[N, 3, H, W]`, standardized.
pub fn to_input(images: &[&Image]) -> Tensor {
    let (h, w) = (images[0].height(), images[0].width());
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for img in images {
        assert_eq!((img.height(), img.width()), (h, w), "batched views must share a size");
        data.extend(img.data().iter().map(|v| (v - INPUT_MEAN) / INPUT_STD));
    }
    Tensor::new(vec![images.len(), 3, h, w], data)
}

pub trait Encoder: Parameterized + Clone {
    type Cache;

    /// Training-head output and the cache for [`Encoder::backward`].
    fn forward(&self, x: &Tensor) -> (Tensor, Self::Cache);

    /// Accumulates parameter gradients for `dloss/d(output) = gy`.
    fn backward(&mut self, cache: &Self::Cache, gy: &Tensor);

    /// Frozen representation used by probes.
    fn features(&self, x: &Tensor) -> Tensor;

    fn output_dim(&self) -> usize;
}

impl Encoder for Network {
    type Cache = NetworkCache;

    fn forward(&self, x: &Tensor) -> (Tensor, NetworkCache) {
        Network::forward(self, x)
    }

    fn backward(&mut self, cache: &NetworkCache, gy: &Tensor) {
        Network::backward(self, cache, gy)
    }

    fn features(&self, x: &Tensor) -> Tensor {
        self.features_chunked(x, 64)
    }

    fn output_dim(&self) -> usize {
        self.config.embedding_dim
    }
}

/// Per-channel means over a `grid x grid` partition, then one linear layer.
#[derive(Clone, Debug)]
pub struct PooledLinear {
    pub grid: usize,
    pub weight: Param,
    pub bias: Param,
}

impl PooledLinear {
    pub fn new(grid: usize, out: usize, rng_seed: u64) -> Self {
        let fin = 3 * grid * grid;
        let mut rng = seed::rng(rng_seed);
        let mut weight = Param::zeros("pool.weight", vec![out, fin], true);
        let bound = (1.0 / fin as f32).sqrt();
        weight.value.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        Self { grid, weight, bias: Param::zeros("pool.bias", vec![out], false) }
    }

    fn pool(&self, x: &Tensor) -> Tensor {
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let g = self.grid;
        let mut out = vec![0.0f32; n * c * g * g];
        for i in 0..n {
            for ch in 0..c {
                let plane = &x.data()[(i * c + ch) * h * w..(i * c + ch + 1) * h * w];
                for gy in 0..g {
                    for gx in 0..g {
                        let (y0, y1, x0, x1) = (gy * h / g, (gy + 1) * h / g, gx * w / g, (gx + 1) * w / g);
                        let mut s = 0.0f32;
                        for y in y0..y1 {
                            s += plane[y * w + x0..y * w + x1].iter().sum::<f32>();
                        }
                        out[((i * c + ch) * g + gy) * g + gx] = s / ((y1 - y0) * (x1 - x0)).max(1) as f32;
                    }
                }
            }
        }
        Tensor::new(vec![n, c * g * g], out)
    }
}

impl Parameterized for PooledLinear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

impl Encoder for PooledLinear {
    type Cache = Tensor;

    fn forward(&self, x: &Tensor) -> (Tensor, Tensor) {
        let f = self.pool(x);
        let (n, fin, out) = (f.rows(), f.row_len(), self.bias.len());
        let mut y = vec![0.0f32; n * out];
        for i in 0..n {
            for o in 0..out {
                let wrow = &self.weight.value[o * fin..(o + 1) * fin];
                y[i * out + o] = self.bias.value[o] + wrow.iter().zip(f.row(i)).map(|(a, b)| a * b).sum::<f32>();
            }
        }
        (Tensor::new(vec![n, out], y), f)
    }

    fn backward(&mut self, f: &Tensor, gy: &Tensor) {
        let (fin, out) = (f.row_len(), self.bias.len());
        for i in 0..f.rows() {
            for o in 0..out {
                let g = gy.row(i)[o];
                self.bias.grad[o] += g;
                for (k, &v) in f.row(i).iter().enumerate() {
                    self.weight.grad[o * fin + k] += g * v;
                }
            }
        }
    }

    fn features(&self, x: &Tensor) -> Tensor {
        self.pool(x)
    }

    fn output_dim(&self) -> usize {
        self.bias.len()
    }
}
