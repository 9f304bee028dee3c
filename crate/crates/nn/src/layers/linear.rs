use rand::Rng;

use crate::gemm::sgemm;
use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

/// Affine map over the last axis of a `[rows, in]` matrix; weight stored `[out, in]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Param,
    pub bias: Option<Param>,
    in_dim: usize,
    out_dim: usize,
}

#[derive(Debug)]
pub struct LinearCache {
    input: Tensor,
}

impl Linear {
    pub fn new<R: Rng>(name: &str, in_dim: usize, out_dim: usize, bias: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f32).sqrt();
        let weight = Param::uniform(format!("{name}.weight"), vec![out_dim, in_dim], bound, rng);
        let bias = bias.then(|| Param::zeros(format!("{name}.bias"), vec![out_dim], false));
        Self { weight, bias, in_dim, out_dim }
    }

    /// Truncated-normal style initialization (std 0.02) used by attention blocks.
    pub fn new_small<R: Rng>(name: &str, in_dim: usize, out_dim: usize, bias: bool, rng: &mut R) -> Self {
        let weight = Param::normal(format!("{name}.weight"), vec![out_dim, in_dim], 0.02, rng);
        let bias = bias.then(|| Param::zeros(format!("{name}.bias"), vec![out_dim], false));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LinearCache) {
        (self.apply(x), LinearCache { input: x.clone() })
    }

    pub fn apply(&self, x: &Tensor) -> Tensor {
        let rows = x.rows();
        assert_eq!(x.row_len(), self.in_dim, "{}: input width", self.weight.name);
        let mut y = vec![0.0f32; rows * self.out_dim];
        sgemm(rows, self.in_dim, self.out_dim, x.data(), false, &self.weight.value, true, 0.0, &mut y);
        if let Some(b) = &self.bias {
            for row in y.chunks_mut(self.out_dim) {
                for (v, bb) in row.iter_mut().zip(&b.value) {
                    *v += bb;
                }
            }
        }
        Tensor::new(vec![rows, self.out_dim], y)
    }

    pub fn backward(&mut self, cache: &LinearCache, gy: &Tensor, input_grad: bool) -> Option<Tensor> {
        let x = &cache.input;
        let rows = x.rows();
        assert_eq!(gy.shape(), &[rows, self.out_dim]);
        sgemm(self.out_dim, rows, self.in_dim, gy.data(), true, x.data(), false, 1.0, &mut self.weight.grad);
        if let Some(b) = self.bias.as_mut() {
            for row in gy.data().chunks(self.out_dim) {
                for (g, v) in b.grad.iter_mut().zip(row) {
                    *g += v;
                }
            }
        }
        if !input_grad {
            return None;
        }
        let mut gx = vec![0.0f32; rows * self.in_dim];
        sgemm(rows, self.out_dim, self.in_dim, gy.data(), false, &self.weight.value, false, 0.0, &mut gx);
        Some(Tensor::new(x.shape().to_vec(), gx))
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&Param> {
        let mut v = vec![&self.weight];
        v.extend(self.bias.as_ref());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.weight];
        v.extend(self.bias.as_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{check_input_grad, check_param_grads, random_tensor, seeded};

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(3);
        let mut lin = Linear::new("l", 5, 4, true, &mut rng);
        lin.bias.as_mut().unwrap().value = vec![0.3, -0.1, 0.2, 0.05];
        let x = random_tensor(vec![3, 5], &mut rng);
        check_input_grad(&x, |x| lin.apply(x), |gy| {
            let mut l = lin.clone();
            let (_, c) = l.forward(&x);
            l.backward(&c, gy, true).unwrap()
        });
        check_param_grads(lin, &x, |m, x| m.apply(x), |m, x, gy| {
            let (_, c) = m.forward(x);
            m.backward(&c, gy, false);
        });
    }
}
