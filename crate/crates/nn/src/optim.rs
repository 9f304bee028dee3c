//! AdamW with decoupled weight decay, plus the cosine learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::param::Param;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamWState {
    pub step: u64,
    pub first: Vec<Vec<f32>>,
    pub second: Vec<Vec<f32>>,
}

#[derive(Clone, Debug)]
pub struct AdamW {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    state: AdamWState,
}

impl AdamW {
    pub fn new(lr: f32, weight_decay: f32) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            state: AdamWState { step: 0, first: Vec::new(), second: Vec::new() },
        }
    }

    pub fn state(&self) -> &AdamWState {
        &self.state
    }

    pub fn load_state(&mut self, state: AdamWState) {
        self.state = state;
    }

    /// One update over `params` (must be the same tensors, in the same order, every call).
    pub fn step(&mut self, mut params: Vec<&mut Param>) {
        if self.state.first.is_empty() {
            self.state.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.state.second = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        assert_eq!(self.state.first.len(), params.len(), "optimizer bound to a different parameter set");
        self.state.step += 1;
        let t = self.state.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (pi, p) in params.iter_mut().enumerate() {
            let m = &mut self.state.first[pi];
            let v = &mut self.state.second[pi];
            let decay = if p.decay { self.lr * self.weight_decay } else { 0.0 };
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p.value[i] -= decay * p.value[i];
                p.value[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Linear warm-up to `base` over `warmup` steps, then cosine decay to zero at `total`.
pub fn warmup_cosine(base: f32, step: usize, warmup: usize, total: usize) -> f32 {
    if total == 0 {
        return base;
    }
    if step < warmup {
        return base * (step + 1) as f32 / warmup as f32;
    }
    let span = (total - warmup).max(1) as f32;
    let progress = ((step - warmup) as f32 / span).min(1.0);
    0.5 * base * (1.0 + (std::f32::consts::PI * progress).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = Param::filled("x", vec![2], 3.0, false);
        let mut opt = AdamW::new(0.1, 0.0);
        for _ in 0..500 {
            p.grad = p.value.iter().map(|v| 2.0 * v).collect();
            opt.step(vec![&mut p]);
        }
        assert!(p.value.iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn decay_skips_flagged_parameters() {
        let mut w = Param::filled("w", vec![1], 1.0, true);
        let mut b = Param::filled("b", vec![1], 1.0, false);
        let mut opt = AdamW::new(0.1, 0.5);
        opt.step(vec![&mut w, &mut b]);
        assert!((w.value[0] - 0.95).abs() < 1e-6);
        assert_eq!(b.value[0], 1.0);
    }

    #[test]
    fn schedule_shape() {
        assert!((warmup_cosine(1.0, 0, 10, 100) - 0.1).abs() < 1e-6);
        assert!((warmup_cosine(1.0, 9, 10, 100) - 1.0).abs() < 1e-6);
        assert!((warmup_cosine(1.0, 10, 10, 100) - 1.0).abs() < 1e-6);
        assert!(warmup_cosine(1.0, 100, 10, 100).abs() < 1e-6);
        assert!(warmup_cosine(1.0, 55, 10, 100) < warmup_cosine(1.0, 30, 10, 100));
    }
}
