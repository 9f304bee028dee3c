use rand::Rng;

use crate::gemm::sgemm;
use crate::param::{Param, Parameterized};
use crate::tensor::Tensor;

/// 2-D convolution over `[N, C, H, W]` inputs, lowered to one batched
/// im2col + sgemm per call.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Option<Param>,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
}

#[derive(Debug)]
pub struct Conv2dCache {
    input: Tensor,
}

struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        let std = (2.0 / fan_in as f32).sqrt();
        let weight = Param::normal(format!("{name}.weight"), vec![out_ch, fan_in], std, rng);
        let bias = bias.then(|| Param::zeros(format!("{name}.bias"), vec![out_ch], false));
        Self { weight, bias, in_ch, out_ch, kernel, stride, pad }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kernel) / self.stride + 1,
            (w + 2 * self.pad - self.kernel) / self.stride + 1,
        )
    }

    fn geometry(&self, x: &Tensor) -> Geometry {
        let s = x.shape();
        assert_eq!(s.len(), 4, "conv input must be NCHW");
        assert_eq!(s[1], self.in_ch, "{}: channel mismatch", self.weight.name);
        let (ho, wo) = self.out_size(s[2], s[3]);
        Geometry { n: s[0], c: s[1], h: s[2], w: s[3], ho, wo }
    }

    /// Valid output-column range `[lo, hi)` for kernel offset `kj` along an axis of length `w`.
    fn valid_range(&self, kj: usize, w: usize, wo: usize) -> (usize, usize) {
        let (s, p) = (self.stride as isize, self.pad as isize);
        let off = kj as isize - p;
        // ox*s + off >= 0  and  ox*s + off < w
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let hi = if (w as isize) - off <= 0 { 0 } else { ((w as isize - off) + s - 1) / s };
        let lo = lo.min(wo as isize) as usize;
        let hi = hi.clamp(lo as isize, wo as isize) as usize;
        (lo, hi)
    }

    /// Column matrix `[C*k*k, count*ho*wo]` for samples `first..first+count`.
    fn im2col(&self, x: &[f32], g: &Geometry, first: usize, count: usize, col: &mut [f32]) {
        let k = self.kernel;
        let hw_out = g.ho * g.wo;
        let cols = count * hw_out;
        for c in 0..g.c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let dst_row = &mut col[row * cols..(row + 1) * cols];
                    let (lo, hi) = self.valid_range(kj, g.w, g.wo);
                    for n in 0..count {
                        let plane = ((first + n) * g.c + c) * g.h * g.w;
                        for oy in 0..g.ho {
                            let dst = &mut dst_row[n * hw_out + oy * g.wo..n * hw_out + (oy + 1) * g.wo];
                            let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                            if iy < 0 || iy >= g.h as isize || lo >= hi {
                                dst.fill(0.0);
                                continue;
                            }
                            dst[..lo].fill(0.0);
                            dst[hi..].fill(0.0);
                            let src_row = &x[plane + iy as usize * g.w..plane + (iy as usize + 1) * g.w];
                            let ix0 = (lo * self.stride + kj) - self.pad;
                            if self.stride == 1 {
                                dst[lo..hi].copy_from_slice(&src_row[ix0..ix0 + (hi - lo)]);
                            } else {
                                for (j, d) in dst[lo..hi].iter_mut().enumerate() {
                                    *d = src_row[ix0 + j * self.stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[f32], g: &Geometry, first: usize, count: usize, x: &mut [f32]) {
        let k = self.kernel;
        let hw_out = g.ho * g.wo;
        let cols = count * hw_out;
        for c in 0..g.c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let src_row = &col[row * cols..(row + 1) * cols];
                    let (lo, hi) = self.valid_range(kj, g.w, g.wo);
                    if lo >= hi {
                        continue;
                    }
                    for n in 0..count {
                        let plane = ((first + n) * g.c + c) * g.h * g.w;
                        for oy in 0..g.ho {
                            let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                            if iy < 0 || iy >= g.h as isize {
                                continue;
                            }
                            let src = &src_row[n * hw_out + oy * g.wo + lo..n * hw_out + oy * g.wo + hi];
                            let dst = &mut x[plane + iy as usize * g.w..plane + (iy as usize + 1) * g.w];
                            let ix0 = (lo * self.stride + kj) - self.pad;
                            for (j, v) in src.iter().enumerate() {
                                dst[ix0 + j * self.stride] += v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Samples per im2col chunk so each gemm sees roughly `TARGET_COLS` columns.
    fn chunk_len(&self, g: &Geometry) -> usize {
        const TARGET_COLS: usize = 1024;
        (TARGET_COLS / (g.ho * g.wo)).clamp(1, g.n.max(1))
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, Conv2dCache) {
        let g = self.geometry(x);
        let hw_out = g.ho * g.wo;
        let ckk = g.c * self.kernel * self.kernel;
        let chunk = self.chunk_len(&g);
        let mut col = vec![0.0f32; ckk * chunk * hw_out];
        let mut y = vec![0.0f32; self.out_ch * chunk * hw_out];
        let mut out = vec![0.0f32; g.n * self.out_ch * hw_out];
        let mut first = 0;
        while first < g.n {
            let count = chunk.min(g.n - first);
            let cols = count * hw_out;
            self.im2col(x.data(), &g, first, count, &mut col[..ckk * cols]);
            if count == 1 {
                let dst = &mut out[first * self.out_ch * hw_out..(first + 1) * self.out_ch * hw_out];
                sgemm(self.out_ch, ckk, cols, &self.weight.value, false, &col[..ckk * cols], false, 0.0, dst);
            } else {
                sgemm(self.out_ch, ckk, cols, &self.weight.value, false, &col[..ckk * cols], false, 0.0, &mut y[..self.out_ch * cols]);
                for co in 0..self.out_ch {
                    for n in 0..count {
                        let src = &y[co * cols + n * hw_out..co * cols + (n + 1) * hw_out];
                        let o = ((first + n) * self.out_ch + co) * hw_out;
                        out[o..o + hw_out].copy_from_slice(src);
                    }
                }
            }
            first += count;
        }
        if let Some(b) = &self.bias {
            for (i, plane) in out.chunks_mut(hw_out).enumerate() {
                let bv = b.value[i % self.out_ch];
                for v in plane {
                    *v += bv;
                }
            }
        }
        (
            Tensor::new(vec![g.n, self.out_ch, g.ho, g.wo], out),
            Conv2dCache { input: x.clone() },
        )
    }

    /// Accumulates weight gradients; returns the input gradient when requested.
    pub fn backward(&mut self, cache: &Conv2dCache, gy: &Tensor, input_grad: bool) -> Option<Tensor> {
        let g = self.geometry(&cache.input);
        let hw_out = g.ho * g.wo;
        let ckk = g.c * self.kernel * self.kernel;
        assert_eq!(gy.shape(), &[g.n, self.out_ch, g.ho, g.wo]);
        if let Some(b) = self.bias.as_mut() {
            for (i, plane) in gy.data().chunks(hw_out).enumerate() {
                b.grad[i % self.out_ch] += plane.iter().sum::<f32>();
            }
        }
        let chunk = self.chunk_len(&g);
        let mut col = vec![0.0f32; ckk * chunk * hw_out];
        let mut gy_t = vec![0.0f32; self.out_ch * chunk * hw_out];
        let mut gx = input_grad.then(|| vec![0.0f32; cache.input.numel()]);
        let mut first = 0;
        while first < g.n {
            let count = chunk.min(g.n - first);
            let cols = count * hw_out;
            let gslice: &[f32] = if count == 1 {
                &gy.data()[first * self.out_ch * hw_out..(first + 1) * self.out_ch * hw_out]
            } else {
                for co in 0..self.out_ch {
                    for n in 0..count {
                        let o = ((first + n) * self.out_ch + co) * hw_out;
                        gy_t[co * cols + n * hw_out..co * cols + (n + 1) * hw_out]
                            .copy_from_slice(&gy.data()[o..o + hw_out]);
                    }
                }
                &gy_t[..self.out_ch * cols]
            };
            self.im2col(cache.input.data(), &g, first, count, &mut col[..ckk * cols]);
            sgemm(self.out_ch, cols, ckk, gslice, false, &col[..ckk * cols], true, 1.0, &mut self.weight.grad);
            if let Some(gx) = gx.as_mut() {
                let gcol = &mut col[..ckk * cols];
                sgemm(ckk, self.out_ch, cols, &self.weight.value, true, gslice, false, 0.0, gcol);
                self.col2im(gcol, &g, first, count, gx);
            }
            first += count;
        }
        gx.map(|d| Tensor::new(vec![g.n, g.c, g.h, g.w], d))
    }
}

impl Parameterized for Conv2d {
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
    use crate::testutil::{check_input_grad, check_param_grads, seeded};

    fn direct(conv: &Conv2d, x: &Tensor) -> Vec<f32> {
        let s = x.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (ho, wo) = conv.out_size(h, w);
        let k = conv.kernel;
        let mut out = vec![0.0; n * conv.out_ch * ho * wo];
        for b in 0..n {
            for co in 0..conv.out_ch {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = conv.bias.as_ref().map_or(0.0, |p| p.value[co]);
                        for ci in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (oy * conv.stride + ki) as isize - conv.pad as isize;
                                    let ix = (ox * conv.stride + kj) as isize - conv.pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    acc += conv.weight.value[co * c * k * k + (ci * k + ki) * k + kj]
                                        * x.data()[((b * c + ci) * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                        out[((b * conv.out_ch + co) * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = seeded(1);
        for &(k, s, p) in &[(3, 1, 1), (3, 2, 1), (1, 2, 0), (5, 1, 2)] {
            let mut conv = Conv2d::new("c", 3, 4, k, s, p, true, &mut rng);
            conv.bias.as_mut().unwrap().value = vec![0.1, -0.2, 0.3, 0.0];
            let x = crate::testutil::random_tensor(vec![2, 3, 7, 6], &mut rng);
            let (y, _) = conv.forward(&x);
            for (a, b) in y.data().iter().zip(direct(&conv, &x)) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(2);
        let conv = Conv2d::new("c", 2, 3, 3, 2, 1, true, &mut rng);
        let x = crate::testutil::random_tensor(vec![2, 2, 5, 5], &mut rng);
        check_input_grad(&x, |x| conv.forward(x).0, |gy| {
            let mut c = conv.clone();
            let (_, cache) = c.forward(&x);
            c.backward(&cache, gy, true).unwrap()
        });
        check_param_grads(conv, &x, |m, x| m.forward(x).0, |m, x, gy| {
            let (_, cache) = m.forward(x);
            m.backward(&cache, gy, false);
        });
    }
}
