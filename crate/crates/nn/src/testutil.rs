//! Finite-difference helpers shared by layer tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::param::Parameterized;
use crate::tensor::Tensor;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect())
}

fn projection(shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|i| ((i as f32) * 0.731 + 0.3).sin()).collect())
}

fn scalar(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
}

fn close(fd: f64, an: f64) -> bool {
    (fd - an).abs() <= 5e-3 + 2e-2 * an.abs().max(fd.abs())
}

/// Checks `backward(dL/dy)` against central differences of `L = <r, f(x)>`.
pub fn check_input_grad(
    x: &Tensor,
    f: impl Fn(&Tensor) -> Tensor,
    backward: impl Fn(&Tensor) -> Tensor,
) {
    let y = f(x);
    let r = projection(y.shape());
    let analytic = backward(&r);
    assert_eq!(analytic.shape(), x.shape());
    let eps = 1e-3f32;
    for i in 0..x.numel() {
        let mut xp = x.clone();
        xp.data_mut()[i] += eps;
        let mut xm = x.clone();
        xm.data_mut()[i] -= eps;
        let fd = (scalar(&f(&xp), &r) - scalar(&f(&xm), &r)) / (2.0 * eps as f64);
        let an = analytic.data()[i] as f64;
        assert!(close(fd, an), "input grad {i}: fd {fd} vs analytic {an}");
    }
}

/// Checks accumulated parameter gradients against central differences.
pub fn check_param_grads<M: Parameterized + Clone>(
    module: M,
    x: &Tensor,
    f: impl Fn(&M, &Tensor) -> Tensor,
    backward: impl Fn(&mut M, &Tensor, &Tensor),
) {
    let y = f(&module, x);
    let r = projection(y.shape());
    let mut m = module.clone();
    m.zero_grad();
    backward(&mut m, x, &r);
    let grads: Vec<Vec<f32>> = m.params().iter().map(|p| p.grad.clone()).collect();
    let eps = 1e-3f32;
    for (pi, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let mut mp = module.clone();
            mp.params_mut()[pi].value[i] += eps;
            let mut mm = module.clone();
            mm.params_mut()[pi].value[i] -= eps;
            let fd = (scalar(&f(&mp, x), &r) - scalar(&f(&mm, x), &r)) / (2.0 * eps as f64);
            let an = g[i] as f64;
            let name = &module.params()[pi].name;
            assert!(close(fd, an), "param {name}[{i}]: fd {fd} vs analytic {an}");
        }
    }
}
