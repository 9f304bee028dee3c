//! Pure image operators: grayscale, saturation blending, Gaussian blur, and the geometric
//! and photometric primitives used by the view pipelines and the corruption suite.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::schedule::{sample_stage_params, DietParams, StageSpec};

/// Side length at which curriculum blur parameters are specified.
pub const REFERENCE_SIDE: f64 = 224.0;

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

#[inline]
pub fn luminance(rgb: [f32; 3]) -> f32 {
    LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2]
}

/// Luminance plane of `img`.
pub fn luma_plane(img: &Image) -> Vec<f32> {
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    (0..img.plane_len()).map(|i| luminance([r[i], g[i], b[i]])).collect()
}

pub fn to_grayscale(img: &Image) -> Image {
    let l = luma_plane(img);
    let mut data = Vec::with_capacity(3 * l.len());
    for _ in 0..3 {
        data.extend_from_slice(&l);
    }
    Image::new(img.height(), img.width(), data).clamp01()
}

/// `s * img + (1 - s) * grayscale(img)`.
pub fn blend_saturation(img: &Image, s: f64) -> Result<Image> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Argument(format!("saturation blend {s} outside [0, 1]")));
    }
    if s == 1.0 {
        return Ok(img.clone());
    }
    Ok(blend_with_gray(img, s as f32))
}

/// Saturation blend without range check (jitter factors may exceed 1).
fn blend_with_gray(img: &Image, s: f32) -> Image {
    let l = luma_plane(img);
    let mut out = img.clone();
    for c in 0..3 {
        for (v, &g) in out.plane_mut(c).iter_mut().zip(&l) {
            *v = s * *v + (1.0 - s) * g;
        }
    }
    out.clamp01()
}

/// Normalized `kernel`-tap Gaussian weights.
pub fn gaussian_kernel(sigma: f64, kernel: usize) -> Vec<f64> {
    let r = (kernel / 2) as f64;
    let w: Vec<f64> = (0..kernel).map(|i| (-((i as f64 - r).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|v| v / sum).collect()
}

/// Mirror index into `[0, n)`, edge sample repeated (`c b a | a b c`). With a symmetric
/// kernel this padding preserves the image mean exactly.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    (if m >= n as isize { period - 1 - m } else { m }) as usize
}

/// Separable convolution of every plane with `kx` along rows and `ky` along columns,
/// reflect padding.
pub fn convolve_separable(img: &Image, kx: &[f64], ky: &[f64]) -> Image {
    let (h, w) = (img.height(), img.width());
    let (rx, ry) = ((kx.len() / 2) as isize, (ky.len() / 2) as isize);
    let mut out = img.clone();
    let mut tmp = vec![0f64; h * w];
    for c in 0..3 {
        let src = img.plane(c);
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (t, &k) in kx.iter().enumerate() {
                    acc += k * row[reflect(x as isize + t as isize - rx, w)] as f64;
                }
                tmp[y * w + x] = acc;
            }
        }
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, &k) in ky.iter().enumerate() {
                    acc += k * tmp[reflect(y as isize + t as isize - ry, h) * w + x];
                }
                dst[y * w + x] = acc as f32;
            }
        }
    }
    out.clamp01()
}

/// Separable Gaussian blur, truncated to `kernel` taps, reflect padding.
pub fn gaussian_blur(img: &Image, sigma: f64, kernel: usize) -> Result<Image> {
    if kernel % 2 == 0 {
        return Err(Error::Argument(format!("blur kernel {kernel} must be odd")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!("blur sigma {sigma} must be finite and non-negative")));
    }
    if kernel > img.height().min(img.width()) {
        return Err(Error::Argument(format!(
            "blur kernel {kernel} exceeds image size {}x{}",
            img.height(),
            img.width()
        )));
    }
    if sigma == 0.0 || kernel == 1 {
        return Ok(img.clone());
    }
    let k = gaussian_kernel(sigma, kernel);
    Ok(convolve_separable(img, &k, &k))
}

/// Rescales reference-resolution blur parameters to a `side`-pixel image; the kernel stays odd.
pub fn scale_blur(sigma: f64, kernel: u32, side: usize) -> (f64, u32) {
    let f = side as f64 / REFERENCE_SIDE;
    let k = 2.0 * ((kernel as f64 * f - 1.0) / 2.0).round() + 1.0;
    (sigma * f, k.max(1.0) as u32)
}

/// Blend with `params.s`, then blur with `(params.sigma, params.kernel)` as given.
pub fn apply_diet_params(img: &Image, params: &DietParams) -> Result<Image> {
    let blended = blend_saturation(img, params.s)?;
    gaussian_blur(&blended, params.sigma, params.kernel as usize)
}

/// Draws the stage's parameters from `rng_seed` and applies them, with blur rescaled
/// from the reference resolution to this image. Returns the parameters actually used.
pub fn apply_diet(img: &Image, stage: &StageSpec, rng_seed: u64) -> Result<(Image, DietParams)> {
    let drawn = sample_stage_params(stage, rng_seed);
    let used = scaled_params(&drawn, img);
    Ok((apply_diet_params(img, &used)?, used))
}

/// `params` with blur rescaled to `img`'s shorter side.
pub fn scaled_params(params: &DietParams, img: &Image) -> DietParams {
    let (sigma, kernel) = scale_blur(params.sigma, params.kernel, img.height().min(img.width()));
    DietParams { s: params.s, sigma, kernel }
}

pub fn hflip(img: &Image) -> Image {
    let w = img.width();
    let mut out = img.clone();
    for c in 0..3 {
        let src = img.plane(c);
        for (y, row) in out.plane_mut(c).chunks_mut(w).enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                *v = src[y * w + (w - 1 - x)];
            }
        }
    }
    out
}

/// Bilinear sample of plane `c` at continuous pixel-center coordinates, edge-clamped.
#[inline]
pub fn sample_bilinear(img: &Image, c: usize, y: f64, x: f64) -> f32 {
    let (h, w) = (img.height(), img.width());
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = ((y - y0 as f64) as f32, (x - x0 as f64) as f32);
    let p = img.plane(c);
    let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
    let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Crop box in source pixels: `(top, left, height, width)`.
pub type CropBox = (f64, f64, f64, f64);

/// Bilinear resample of `crop` to `out_h x out_w`.
pub fn resized_crop(img: &Image, crop: CropBox, out_h: usize, out_w: usize) -> Image {
    let (top, left, ch, cw) = crop;
    let (sy, sx) = (ch / out_h as f64, cw / out_w as f64);
    let mut out = Image::filled(out_h, out_w, [0.0; 3]);
    for c in 0..3 {
        let mut vals = Vec::with_capacity(out_h * out_w);
        for oy in 0..out_h {
            let y = top + (oy as f64 + 0.5) * sy - 0.5;
            for ox in 0..out_w {
                let x = left + (ox as f64 + 0.5) * sx - 0.5;
                vals.push(sample_bilinear(img, c, y, x));
            }
        }
        out.plane_mut(c).copy_from_slice(&vals);
    }
    out
}

pub fn resize(img: &Image, out_h: usize, out_w: usize) -> Image {
    resized_crop(img, (0.0, 0.0, img.height() as f64, img.width() as f64), out_h, out_w)
}

pub fn adjust_brightness(img: &Image, factor: f32) -> Image {
    img.map(|v| v * factor).clamp01()
}

/// Blend toward the mean luminance.
pub fn adjust_contrast(img: &Image, factor: f32) -> Image {
    let mean = luma_plane(img).iter().map(|&v| v as f64).sum::<f64>() / img.plane_len() as f64;
    let m = mean as f32;
    img.map(|v| factor * v + (1.0 - factor) * m).clamp01()
}

pub fn adjust_saturation(img: &Image, factor: f32) -> Image {
    blend_with_gray(img, factor)
}

/// Rotates hue by `shift` turns (`[-0.5, 0.5]`).
pub fn adjust_hue(img: &Image, shift: f32) -> Image {
    map_hsv(img, |h, s, v| ((h + shift).rem_euclid(1.0), s, v))
}

/// Applies `f` in HSV space to every pixel.
pub fn map_hsv(img: &Image, f: impl Fn(f32, f32, f32) -> (f32, f32, f32)) -> Image {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (h, s, v) = rgb_to_hsv(img.get(y, x));
            let (h, s, v) = f(h, s, v);
            out.set(y, x, hsv_to_rgb(h, s.clamp(0.0, 1.0), v.clamp(0.0, 1.0)));
        }
    }
    out.clamp01()
}

/// Hue in turns `[0, 1)`, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv([r, g, b]: [f32; 3]) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let s = if max > 0.0 { d / max } else { 0.0 };
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    (h, s, max)
}

pub fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as i32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}
