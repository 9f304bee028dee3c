use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Gradient of ReLU given the forward *output*.
pub fn relu_backward(y: &Tensor, gy: &Tensor) -> Tensor {
    let data = y.data().iter().zip(gy.data()).map(|(&o, &g)| if o > 0.0 { g } else { 0.0 }).collect();
    Tensor::new(y.shape().to_vec(), data)
}

const SQRT_2_OVER_PI: f32 = 0.797_884_6;
const GELU_C: f32 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu(x: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .map(|&v| 0.5 * v * (1.0 + (SQRT_2_OVER_PI * (v + GELU_C * v * v * v)).tanh()))
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Gradient of GELU given the forward *input*.
pub fn gelu_backward(x: &Tensor, gy: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(gy.data())
        .map(|(&v, &g)| {
            let inner = SQRT_2_OVER_PI * (v + GELU_C * v * v * v);
            let t = inner.tanh();
            let dinner = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * v * v);
            g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner)
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Row-wise L2 normalization of a `[rows, dim]` matrix. Returns the output and the row norms.
pub fn l2_normalize_rows(x: &Tensor) -> (Tensor, Vec<f32>) {
    let d = x.row_len();
    let mut out = x.data().to_vec();
    let mut norms = Vec::with_capacity(x.rows());
    for row in out.chunks_mut(d) {
        let n = row.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-12);
        for v in row.iter_mut() {
            *v /= n;
        }
        norms.push(n);
    }
    (Tensor::new(x.shape().to_vec(), out), norms)
}

pub fn l2_normalize_backward(y: &Tensor, norms: &[f32], gy: &Tensor) -> Tensor {
    let d = y.row_len();
    let mut gx = vec![0.0f32; y.numel()];
    for (r, &n) in norms.iter().enumerate() {
        let yr = &y.data()[r * d..(r + 1) * d];
        let gr = &gy.data()[r * d..(r + 1) * d];
        let dot: f32 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for j in 0..d {
            gx[r * d + j] = (gr[j] - dot * yr[j]) / n;
        }
    }
    Tensor::new(y.shape().to_vec(), gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{check_input_grad, random_tensor, seeded};

    #[test]
    fn gelu_gradient() {
        let x = random_tensor(vec![4, 5], &mut seeded(6));
        check_input_grad(&x, gelu, |gy| gelu_backward(&x, gy));
    }

    #[test]
    fn l2_normalize_gradient() {
        let x = random_tensor(vec![3, 4], &mut seeded(7));
        check_input_grad(&x, |x| l2_normalize_rows(x).0, |gy| {
            let (y, n) = l2_normalize_rows(&x);
            l2_normalize_backward(&y, &n, gy)
        });
    }

    #[test]
    fn relu_masks_negative_outputs() {
        let x = Tensor::new(vec![1, 4], vec![-1.0, 0.5, 0.0, 2.0]);
        let y = relu(&x);
        let g = relu_backward(&y, &Tensor::new(vec![1, 4], vec![1.0; 4]));
        assert_eq!(g.data(), &[0.0, 1.0, 0.0, 1.0]);
    }
}
