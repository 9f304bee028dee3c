//! Single-plane helpers shared by the corruption families: Gaussian filtering,
//! centered zoom, directional blur, Perlin and plasma noise.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::image::Image;
use crate::seed::Rng;
use crate::transforms::{convolve_separable, gaussian_kernel, reflect};

/// A single `h x w` float plane.
#[derive(Clone, Debug)]
pub(super) struct Plane {
    pub h: usize,
    pub w: usize,
    pub v: Vec<f32>,
}

impl Plane {
    pub fn new(h: usize, w: usize, v: Vec<f32>) -> Self {
        assert_eq!(v.len(), h * w);
        Self { h, w, v }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.v[y * self.w + x]
    }

    /// Bilinear sample, edge-clamped.
    pub fn sample(&self, y: f64, x: f64) -> f32 {
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(self.h - 1), (x0 + 1).min(self.w - 1));
        let (fy, fx) = ((y - y0 as f64) as f32, (x - x0 as f64) as f32);
        let top = self.at(y0, x0) * (1.0 - fx) + self.at(y0, x1) * fx;
        let bot = self.at(y1, x0) * (1.0 - fx) + self.at(y1, x1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    pub fn rot180(&self) -> Plane {
        let mut v = self.v.clone();
        v.reverse();
        Plane::new(self.h, self.w, v)
    }
}

pub(super) fn planes(img: &Image) -> [Plane; 3] {
    let p = |c| Plane::new(img.height(), img.width(), img.plane(c).to_vec());
    [p(0), p(1), p(2)]
}

pub(super) fn from_planes(p: [Plane; 3]) -> Image {
    let (h, w) = (p[0].h, p[0].w);
    let mut data = Vec::with_capacity(3 * h * w);
    for q in &p {
        data.extend_from_slice(&q.v);
    }
    Image::new(h, w, data)
}

/// Gaussian filter truncated at four sigma, reflect padding.
pub(super) fn gaussian_image(img: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let r = (4.0 * sigma).round().max(1.0) as usize;
    let k = gaussian_kernel(sigma, 2 * r + 1);
    convolve_separable(img, &k, &k)
}

pub(super) fn gaussian_plane(p: &Plane, sigma: f64) -> Plane {
    let r = (4.0 * sigma).round().max(1.0) as usize;
    let k = gaussian_kernel(sigma, 2 * r + 1);
    let (h, w) = (p.h, p.w);
    let ri = r as isize;
    let mut tmp = vec![0f64; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] =
                k.iter().enumerate().map(|(t, &kv)| kv * p.at(y, reflect(x as isize + t as isize - ri, w)) as f64).sum();
        }
    }
    let mut out = vec![0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, &kv)| kv * tmp[reflect(y as isize + t as isize - ri, h) * w + x])
                .sum::<f64>() as f32;
        }
    }
    Plane::new(h, w, out)
}

/// Dense 2-D convolution with a `kh x kw` kernel, reflect padding.
pub(super) fn convolve2d(img: &Image, kernel: &[f64], kh: usize, kw: usize) -> Image {
    let (h, w) = (img.height(), img.width());
    let (ry, rx) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = img.clone();
    for c in 0..3 {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in 0..kh {
                    let sy = reflect(y as isize + ky as isize - ry, h);
                    for kx in 0..kw {
                        let sx = reflect(x as isize + kx as isize - rx, w);
                        acc += kernel[ky * kw + kx] * src[sy * w + sx] as f64;
                    }
                }
                dst[y * w + x] = acc as f32;
            }
        }
    }
    out
}

/// Magnifies about the center by `z >= 1`, keeping the size.
pub(super) fn zoom_plane(p: &Plane, z: f64) -> Plane {
    let (cy, cx) = ((p.h as f64 - 1.0) / 2.0, (p.w as f64 - 1.0) / 2.0);
    let mut v = Vec::with_capacity(p.h * p.w);
    for y in 0..p.h {
        for x in 0..p.w {
            v.push(p.sample(cy + (y as f64 - cy) / z, cx + (x as f64 - cx) / z));
        }
    }
    Plane::new(p.h, p.w, v)
}

/// One-sided directional blur: taps at distances `0..=2*ceil(radius)` along `angle_deg`,
/// Gaussian-weighted by distance.
pub(super) fn motion_plane(p: &Plane, radius: f64, sigma: f64, angle_deg: f64) -> Plane {
    let taps = 2 * radius.ceil().max(1.0) as usize + 1;
    let sigma = sigma.max(0.3);
    let weights: Vec<f64> = (0..taps).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let (dy, dx) = ((angle_deg + 90.0).to_radians().cos(), (angle_deg + 90.0).to_radians().sin());
    let mut v = Vec::with_capacity(p.h * p.w);
    for y in 0..p.h {
        for x in 0..p.w {
            let acc: f64 = weights
                .iter()
                .enumerate()
                .map(|(i, &wt)| wt * p.sample(y as f64 + i as f64 * dy, x as f64 + i as f64 * dx) as f64)
                .sum();
            v.push((acc / total) as f32);
        }
    }
    Plane::new(p.h, p.w, v)
}

/// Seeded 2-D gradient noise.
pub(super) struct Perlin {
    perm: Vec<usize>,
    grads: Vec<(f64, f64)>,
}

impl Perlin {
    pub fn new(rng: &mut Rng) -> Self {
        let mut perm: Vec<usize> = (0..256).collect();
        perm.shuffle(rng);
        let grads = (0..256)
            .map(|_| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                (a.cos(), a.sin())
            })
            .collect();
        Self { perm, grads }
    }

    fn grad(&self, ix: i64, iy: i64) -> (f64, f64) {
        let i = self.perm[(ix & 255) as usize];
        self.grads[self.perm[(i + (iy & 255) as usize) & 255]]
    }

    /// Roughly in `[-1, 1]`.
    pub fn noise(&self, x: f64, y: f64) -> f64 {
        let (x0, y0) = (x.floor() as i64, y.floor() as i64);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let dot = |ix: i64, iy: i64| {
            let g = self.grad(ix, iy);
            g.0 * (x - ix as f64) + g.1 * (y - iy as f64)
        };
        let (u, v) = (fade(fx), fade(fy));
        let a = dot(x0, y0) + u * (dot(x0 + 1, y0) - dot(x0, y0));
        let b = dot(x0, y0 + 1) + u * (dot(x0 + 1, y0 + 1) - dot(x0, y0 + 1));
        (a + v * (b - a)) * std::f64::consts::SQRT_2
    }

    pub fn fractal(&self, x: f64, y: f64, octaves: usize) -> f64 {
        let (mut amp, mut freq, mut sum, mut norm) = (1.0, 1.0, 0.0, 0.0);
        for _ in 0..octaves {
            sum += amp * self.noise(x * freq, y * freq);
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        sum / norm
    }
}

/// Diamond-square plasma on a `size x size` grid (power of two), normalized to `[0, 1]`.
pub(super) fn plasma(size: usize, wibble_decay: f64, rng: &mut Rng) -> Vec<f64> {
    assert!(size.is_power_of_two());
    let n = size;
    let mut m = vec![0f64; n * n];
    let at = |y: usize, x: usize| (y % n) * n + (x % n);
    let mut step = n;
    let mut wibble = 100.0;
    while step >= 2 {
        let half = step / 2;
        // squares
        for y in (0..n).step_by(step) {
            for x in (0..n).step_by(step) {
                let avg = (m[at(y, x)] + m[at(y, x + step)] + m[at(y + step, x)] + m[at(y + step, x + step)]) / 4.0;
                m[at(y + half, x + half)] = avg + wibble * rng.random_range(-1.0..1.0);
            }
        }
        // diamonds
        for y in (0..n).step_by(half) {
            let start = if (y / half) % 2 == 0 { half } else { 0 };
            for x in (start..n).step_by(step) {
                let avg = (m[at(y + n - half, x)] + m[at(y + half, x)] + m[at(y, x + n - half)] + m[at(y, x + half)]) / 4.0;
                m[at(y, x)] = avg + wibble * rng.random_range(-1.0..1.0);
            }
        }
        step = half;
        wibble /= wibble_decay;
    }
    let (lo, hi) = m.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    m.iter().map(|v| (v - lo) / (hi - lo).max(1e-12)).collect()
}
