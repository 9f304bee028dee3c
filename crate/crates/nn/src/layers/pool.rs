use crate::tensor::Tensor;

/// `[N, C, H, W] -> [N, C]` spatial mean.
pub fn global_avg_pool(x: &Tensor) -> Tensor {
    let s = x.shape();
    let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
    let data = x.data().chunks(hw).map(|p| p.iter().sum::<f32>() / hw as f32).collect();
    Tensor::new(vec![n, c], data)
}

pub fn global_avg_pool_backward(shape: &[usize], gy: &Tensor) -> Tensor {
    let hw = shape[2] * shape[3];
    let scale = 1.0 / hw as f32;
    let mut gx = Vec::with_capacity(shape.iter().product());
    for &g in gy.data() {
        gx.extend(std::iter::repeat_n(g * scale, hw));
    }
    Tensor::new(shape.to_vec(), gx)
}

/// `[B*T, D] -> [B, D]` mean over each run of `tokens` rows.
pub fn token_mean(x: &Tensor, tokens: usize) -> Tensor {
    let d = x.row_len();
    let b = x.rows() / tokens;
    let mut out = vec![0.0f32; b * d];
    for bi in 0..b {
        for t in 0..tokens {
            let row = x.row(bi * tokens + t);
            for j in 0..d {
                out[bi * d + j] += row[j];
            }
        }
    }
    for v in &mut out {
        *v /= tokens as f32;
    }
    Tensor::new(vec![b, d], out)
}

pub fn token_mean_backward(gy: &Tensor, tokens: usize) -> Tensor {
    let d = gy.row_len();
    let b = gy.rows();
    let mut gx = Vec::with_capacity(b * tokens * d);
    for bi in 0..b {
        for _ in 0..tokens {
            gx.extend(gy.row(bi).iter().map(|g| g / tokens as f32));
        }
    }
    Tensor::new(vec![b * tokens, d], gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{check_input_grad, random_tensor, seeded};

    #[test]
    fn pooling_gradients() {
        let x = random_tensor(vec![2, 3, 2, 2], &mut seeded(8));
        check_input_grad(&x, global_avg_pool, |gy| global_avg_pool_backward(x.shape(), gy));
        let t = random_tensor(vec![6, 4], &mut seeded(9));
        check_input_grad(&t, |t| token_mean(t, 3), |gy| token_mean_backward(gy, 3));
    }
}
