use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

const EPS: f32 = 1e-5;

/// Group normalization over `[N, C, H, W]`. Statistics are per sample, so
/// training and inference behave identically and no running buffers exist.
#[derive(Clone, Debug)]
pub struct GroupNorm {
    pub gamma: Param,
    pub beta: Param,
    groups: usize,
    channels: usize,
}

#[derive(Debug)]
pub struct GroupNormCache {
    xhat: Vec<f32>,
    inv_std: Vec<f32>,
    shape: Vec<usize>,
}

impl GroupNorm {
    pub fn new(name: &str, groups: usize, channels: usize) -> Self {
        assert!(channels % groups == 0, "{channels} channels not divisible into {groups} groups");
        Self {
            gamma: Param::filled(format!("{name}.gamma"), vec![channels], 1.0, false),
            beta: Param::zeros(format!("{name}.beta"), vec![channels], false),
            groups,
            channels,
        }
    }

    /// Largest group count ≤ 8 that divides `channels`.
    pub fn default_groups(channels: usize) -> usize {
        (1..=8.min(channels)).rev().find(|g| channels % g == 0).unwrap_or(1)
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, GroupNormCache) {
        let s = x.shape();
        let (n, c) = (s[0], s[1]);
        assert_eq!(c, self.channels);
        let hw = s[2] * s[3];
        let cpg = c / self.groups;
        let m = cpg * hw;
        let mut xhat = vec![0.0f32; x.numel()];
        let mut out = vec![0.0f32; x.numel()];
        let mut inv_std = vec![0.0f32; n * self.groups];
        for b in 0..n {
            for g in 0..self.groups {
                let start = (b * c + g * cpg) * hw;
                let seg = &x.data()[start..start + m];
                let mean = seg.iter().sum::<f32>() / m as f32;
                let var = seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / m as f32;
                let is = 1.0 / (var + EPS).sqrt();
                inv_std[b * self.groups + g] = is;
                for ci in 0..cpg {
                    let ch = g * cpg + ci;
                    let (ga, be) = (self.gamma.value[ch], self.beta.value[ch]);
                    let range = start + ci * hw..start + (ci + 1) * hw;
                    let src = &x.data()[range.clone()];
                    for ((h, o), &v) in xhat[range.clone()].iter_mut().zip(&mut out[range]).zip(src) {
                        *h = (v - mean) * is;
                        *o = *h * ga + be;
                    }
                }
            }
        }
        (
            Tensor::new(s.to_vec(), out),
            GroupNormCache { xhat, inv_std, shape: s.to_vec() },
        )
    }

    pub fn backward(&mut self, cache: &GroupNormCache, gy: &Tensor) -> Tensor {
        let s = &cache.shape;
        let (n, c) = (s[0], s[1]);
        let hw = s[2] * s[3];
        let cpg = c / self.groups;
        let m = (cpg * hw) as f32;
        let mut gx = vec![0.0f32; gy.numel()];
        for b in 0..n {
            for g in 0..self.groups {
                let start = (b * c + g * cpg) * hw;
                let mut sum_g = 0.0f32;
                let mut sum_gx = 0.0f32;
                for ci in 0..cpg {
                    let ch = g * cpg + ci;
                    let ga = self.gamma.value[ch];
                    let range = start + ci * hw..start + (ci + 1) * hw;
                    let (mut dg, mut db) = (0.0f32, 0.0f32);
                    for (&gyv, &xh) in gy.data()[range.clone()].iter().zip(&cache.xhat[range]) {
                        dg += gyv * xh;
                        db += gyv;
                    }
                    self.gamma.grad[ch] += dg;
                    self.beta.grad[ch] += db;
                    sum_g += db * ga;
                    sum_gx += dg * ga;
                }
                let is = cache.inv_std[b * self.groups + g];
                for ci in 0..cpg {
                    let ga = self.gamma.value[g * cpg + ci];
                    let range = start + ci * hw..start + (ci + 1) * hw;
                    let k = is / m;
                    for ((o, &gyv), &xh) in gx[range.clone()].iter_mut().zip(&gy.data()[range.clone()]).zip(&cache.xhat[range]) {
                        *o = k * (m * gyv * ga - sum_g - xh * sum_gx);
                    }
                }
            }
        }
        Tensor::new(s.clone(), gx)
    }
}

impl Parameterized for GroupNorm {
    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

/// Layer normalization over the last axis of `[rows, dim]`.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
    dim: usize,
}

#[derive(Debug)]
pub struct LayerNormCache {
    xhat: Vec<f32>,
    inv_std: Vec<f32>,
    shape: Vec<usize>,
}

impl LayerNorm {
    pub fn new(name: &str, dim: usize) -> Self {
        Self {
            gamma: Param::filled(format!("{name}.gamma"), vec![dim], 1.0, false),
            beta: Param::zeros(format!("{name}.beta"), vec![dim], false),
            dim,
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerNormCache) {
        let d = self.dim;
        assert_eq!(x.row_len(), d);
        let rows = x.numel() / d;
        let mut xhat = vec![0.0f32; x.numel()];
        let mut out = vec![0.0f32; x.numel()];
        let mut inv_std = vec![0.0f32; rows];
        for r in 0..rows {
            let seg = &x.data()[r * d..(r + 1) * d];
            let mean = seg.iter().sum::<f32>() / d as f32;
            let var = seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
            let is = 1.0 / (var + EPS).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (seg[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = h * self.gamma.value[j] + self.beta.value[j];
            }
        }
        (
            Tensor::new(x.shape().to_vec(), out),
            LayerNormCache { xhat, inv_std, shape: x.shape().to_vec() },
        )
    }

    pub fn backward(&mut self, cache: &LayerNormCache, gy: &Tensor) -> Tensor {
        let d = self.dim;
        let rows = gy.numel() / d;
        let mut gx = vec![0.0f32; gy.numel()];
        for r in 0..rows {
            let mut sum_g = 0.0f32;
            let mut sum_gx = 0.0f32;
            for j in 0..d {
                let idx = r * d + j;
                let gyv = gy.data()[idx];
                let xh = cache.xhat[idx];
                self.gamma.grad[j] += gyv * xh;
                self.beta.grad[j] += gyv;
                let gh = gyv * self.gamma.value[j];
                sum_g += gh;
                sum_gx += gh * xh;
            }
            let is = cache.inv_std[r];
            for j in 0..d {
                let idx = r * d + j;
                let gh = gy.data()[idx] * self.gamma.value[j];
                gx[idx] = is / d as f32 * (d as f32 * gh - sum_g - cache.xhat[idx] * sum_gx);
            }
        }
        Tensor::new(cache.shape.clone(), gx)
    }
}

impl Parameterized for LayerNorm {
    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{check_input_grad, check_param_grads, random_tensor, seeded};

    #[test]
    fn group_norm_gradients() {
        let mut rng = seeded(4);
        let mut gn = GroupNorm::new("gn", 2, 4);
        gn.gamma.value = vec![1.2, 0.7, -0.4, 1.0];
        gn.beta.value = vec![0.1, 0.0, 0.2, -0.3];
        let x = random_tensor(vec![2, 4, 3, 3], &mut rng);
        check_input_grad(&x, |x| gn.forward(x).0, |gy| {
            let mut g = gn.clone();
            let (_, c) = g.forward(&x);
            g.backward(&c, gy)
        });
        check_param_grads(gn, &x, |m, x| m.forward(x).0, |m, x, gy| {
            let (_, c) = m.forward(x);
            m.backward(&c, gy);
        });
    }

    #[test]
    fn layer_norm_gradients() {
        let mut rng = seeded(5);
        let mut ln = LayerNorm::new("ln", 6);
        ln.gamma.value = vec![1.0, 0.5, 2.0, -1.0, 0.3, 1.1];
        let x = random_tensor(vec![3, 6], &mut rng);
        check_input_grad(&x, |x| ln.forward(x).0, |gy| {
            let mut l = ln.clone();
            let (_, c) = l.forward(&x);
            l.backward(&c, gy)
        });
        check_param_grads(ln, &x, |m, x| m.forward(x).0, |m, x, gy| {
            let (_, c) = m.forward(x);
            m.backward(&c, gy);
        });
    }

    #[test]
    fn group_count_divides_channels() {
        assert_eq!(GroupNorm::default_groups(16), 8);
        assert_eq!(GroupNorm::default_groups(12), 6);
        assert_eq!(GroupNorm::default_groups(3), 3);
    }
}
