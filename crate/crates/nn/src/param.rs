//! Trainable parameters and traversal over parameterized modules.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A named trainable tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
    /// Whether decoupled weight decay applies (weights yes, biases and norm affines no).
    pub decay: bool,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>, decay: bool) -> Self {
        let n = shape.iter().product();
        Self { name: name.into(), shape, value: vec![0.0; n], grad: vec![0.0; n], decay }
    }

    pub fn filled(name: impl Into<String>, shape: Vec<usize>, v: f32, decay: bool) -> Self {
        let mut p = Self::zeros(name, shape, decay);
        p.value.fill(v);
        p
    }

    pub fn normal<R: Rng>(name: impl Into<String>, shape: Vec<usize>, std: f32, rng: &mut R) -> Self {
        let mut p = Self::zeros(name, shape, true);
        let dist = Normal::new(0.0f32, std).expect("finite std");
        for v in &mut p.value {
            *v = dist.sample(rng);
        }
        p
    }

    pub fn uniform<R: Rng>(name: impl Into<String>, shape: Vec<usize>, bound: f32, rng: &mut R) -> Self {
        let mut p = Self::zeros(name, shape, true);
        for v in &mut p.value {
            *v = rng.random_range(-bound..bound);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns trainable parameters.
///
/// The traversal order is fixed per architecture; optimizers, checkpoints and
/// EMA teachers rely on it to pair parameters positionally.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Hash over every parameter's bit pattern; equal iff values are bitwise equal
    /// (modulo hash collisions).
    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in self.params() {
            p.name.hash(&mut h);
            for v in &p.value {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Sum of squared gradients across all parameters.
    fn grad_sq_norm(&self) -> f64 {
        self.params()
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|&g| (g as f64) * (g as f64))
            .sum()
    }
}

/// Error raised when two parameter sets cannot be paired.
#[derive(Debug, thiserror::Error)]
#[error("parameter structure mismatch: {0}")]
pub struct StructureMismatch(pub String);

/// Copies all parameter values from `src` into `dst`.
pub fn copy_values<A: Parameterized + ?Sized, B: Parameterized + ?Sized>(
    dst: &mut A,
    src: &B,
) -> Result<(), StructureMismatch> {
    let src = src.params();
    let mut dst = dst.params_mut();
    check_pairing(&dst.iter().map(|p| &**p).collect::<Vec<_>>(), &src)?;
    for (d, s) in dst.iter_mut().zip(src) {
        d.value.copy_from_slice(&s.value);
    }
    Ok(())
}

fn check_pairing(a: &[&Param], b: &[&Param]) -> Result<(), StructureMismatch> {
    if a.len() != b.len() {
        return Err(StructureMismatch(format!("{} vs {} tensors", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        if x.shape != y.shape {
            return Err(StructureMismatch(format!(
                "{} has shape {:?}, {} has shape {:?}",
                x.name, x.shape, y.name, y.shape
            )));
        }
    }
    Ok(())
}

/// `target <- m * target + (1 - m) * source`, parameterwise.
pub fn ema_blend<A: Parameterized + ?Sized, B: Parameterized + ?Sized>(
    target: &mut A,
    source: &B,
    momentum: f32,
) -> Result<(), StructureMismatch> {
    let src = source.params();
    let mut dst = target.params_mut();
    check_pairing(&dst.iter().map(|p| &**p).collect::<Vec<_>>(), &src)?;
    let keep = momentum;
    let take = 1.0 - momentum;
    for (d, s) in dst.iter_mut().zip(src) {
        for (t, v) in d.value.iter_mut().zip(&s.value) {
            *t = keep * *t + take * v;
        }
    }
    Ok(())
}

/// Flattened snapshot of all parameter values in traversal order.
pub fn flatten_values<A: Parameterized + ?Sized>(m: &A) -> Vec<f32> {
    m.params().iter().flat_map(|p| p.value.iter().copied()).collect()
}
