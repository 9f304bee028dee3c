//! Contrast, elastic warp, pixelation, and JPEG re-encoding.

use image::ImageEncoder;
use rand::Rng as _;

use super::procedural::{gaussian_plane, Plane};
use crate::image::Image;
use crate::seed::Rng;
use crate::transforms::{reflect, sample_bilinear};

const CONTRAST: [f32; 5] = [0.4, 0.3, 0.2, 0.1, 0.05];
/// (displacement scale, smoothing sigma, affine jitter), as fractions of the side.
const ELASTIC: [(f64, f64, f64); 5] = [(2.0, 0.7, 0.1), (2.0, 0.08, 0.2), (0.05, 0.01, 0.02), (0.07, 0.01, 0.02), (0.12, 0.01, 0.02)];
const PIXELATE: [f64; 5] = [0.6, 0.5, 0.4, 0.3, 0.25];
const JPEG_QUALITY: [u8; 5] = [25, 18, 15, 10, 7];

pub(super) const TABLE: &str = "contrast .4 .3 .2 .1 .05; elastic (2,.7,.1)(2,.08,.2)(.05,.01,.02)(.07,.01,.02)(.12,.01,.02); \
pixelate .6 .5 .4 .3 .25; jpeg 25 18 15 10 7\n";

/// Pulls each channel toward its own mean.
pub(super) fn contrast(img: &Image, sev: usize) -> Image {
    let c = CONTRAST[sev];
    let mut out = img.clone();
    for ch in 0..3 {
        let p = out.plane_mut(ch);
        let mean = (p.iter().map(|&v| v as f64).sum::<f64>() / p.len() as f64) as f32;
        for v in p.iter_mut() {
            *v = (*v - mean) * c + mean;
        }
    }
    out
}

/// Solves the affine map sending `src[i]` to `dst[i]` for three points.
fn affine_from_points(src: [(f64, f64); 3], dst: [(f64, f64); 3]) -> [f64; 6] {
    // [x' y'] = [a b c; d e f] [x y 1]
    let [(x0, y0), (x1, y1), (x2, y2)] = src;
    let det = x0 * (y1 - y2) - y0 * (x1 - x2) + (x1 * y2 - x2 * y1);
    let inv = [
        [(y1 - y2) / det, (y2 - y0) / det, (y0 - y1) / det],
        [(x2 - x1) / det, (x0 - x2) / det, (x1 - x0) / det],
        [(x1 * y2 - x2 * y1) / det, (x2 * y0 - x0 * y2) / det, (x0 * y1 - x1 * y0) / det],
    ];
    let solve = |t: [f64; 3]| {
        [
            inv[0][0] * t[0] + inv[0][1] * t[1] + inv[0][2] * t[2],
            inv[1][0] * t[0] + inv[1][1] * t[1] + inv[1][2] * t[2],
            inv[2][0] * t[0] + inv[2][1] * t[1] + inv[2][2] * t[2],
        ]
    };
    let [a, b, c] = solve([dst[0].0, dst[1].0, dst[2].0]);
    let [d, e, f] = solve([dst[0].1, dst[1].1, dst[2].1]);
    [a, b, c, d, e, f]
}

/// Random affine jitter followed by a smoothed random displacement field.
pub(super) fn elastic(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let (h, w) = (img.height(), img.width());
    let side = h.min(w) as f64;
    let (alpha, sigma, jitter) = (ELASTIC[sev].0 * side, ELASTIC[sev].1 * side, ELASTIC[sev].2 * side);

    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let sq = side / 3.0;
    let src = [(cx + sq, cy + sq), (cx + sq, cy - sq), (cx - sq, cy - sq)];
    let mut dst = src;
    for p in &mut dst {
        p.0 += rng.random_range(-jitter..=jitter);
        p.1 += rng.random_range(-jitter..=jitter);
    }
    // Output pixel q reads input at M^-1 q; solve for the inverse map directly.
    let m = affine_from_points(dst, src);
    let mut warped = img.clone();
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let sx = m[0] * xf + m[1] * yf + m[2];
            let sy = m[3] * xf + m[4] * yf + m[5];
            let (sx, sy) = (reflect_coord(sx, w), reflect_coord(sy, h));
            warped.set(y, x, [0, 1, 2].map(|c| sample_bilinear(img, c, sy, sx)));
        }
    }

    let field = |rng: &mut Rng| {
        let raw = Plane::new(h, w, (0..h * w).map(|_| rng.random_range(-1.0f32..=1.0)).collect());
        gaussian_plane(&raw, sigma.max(0.5))
    };
    let (dx, dy) = (field(rng), field(rng));
    let mut out = warped.clone();
    for y in 0..h {
        for x in 0..w {
            let sx = reflect_coord(x as f64 + alpha * dx.at(y, x) as f64, w);
            let sy = reflect_coord(y as f64 + alpha * dy.at(y, x) as f64, h);
            out.set(y, x, [0, 1, 2].map(|c| sample_bilinear(&warped, c, sy, sx)));
        }
    }
    out
}

/// Continuous coordinate mirrored into `[0, n - 1]`.
fn reflect_coord(v: f64, n: usize) -> f64 {
    let i = v.floor();
    let frac = v - i;
    let a = reflect(i as isize, n) as f64;
    let b = reflect(i as isize + 1, n) as f64;
    a + (b - a) * frac
}

/// Box-average down to `factor` of the size, then nearest-neighbor back up.
pub(super) fn pixelate(img: &Image, sev: usize) -> Image {
    let (h, w) = (img.height(), img.width());
    let (sh, sw) = (((h as f64 * PIXELATE[sev]).round() as usize).max(1), ((w as f64 * PIXELATE[sev]).round() as usize).max(1));
    let mut out = img.clone();
    for c in 0..3 {
        let p = img.plane(c);
        let mut small = vec![0f64; sh * sw];
        for (sy, row) in small.chunks_mut(sw).enumerate() {
            let (y0, y1) = (sy as f64 * h as f64 / sh as f64, (sy + 1) as f64 * h as f64 / sh as f64);
            for (sx, cell) in row.iter_mut().enumerate() {
                let (x0, x1) = (sx as f64 * w as f64 / sw as f64, (sx + 1) as f64 * w as f64 / sw as f64);
                let (mut acc, mut area) = (0.0, 0.0);
                for y in y0.floor() as usize..(y1.ceil() as usize).min(h) {
                    let wy = (y1.min(y as f64 + 1.0) - y0.max(y as f64)).max(0.0);
                    for x in x0.floor() as usize..(x1.ceil() as usize).min(w) {
                        let wx = (x1.min(x as f64 + 1.0) - x0.max(x as f64)).max(0.0);
                        acc += wy * wx * p[y * w + x] as f64;
                        area += wy * wx;
                    }
                }
                *cell = acc / area;
            }
        }
        let dst = out.plane_mut(c);
        for y in 0..h {
            let sy = (y * sh / h).min(sh - 1);
            for x in 0..w {
                let sx = (x * sw / w).min(sw - 1);
                dst[y * w + x] = small[sy * sw + sx] as f32;
            }
        }
    }
    out
}

pub(super) fn jpeg(img: &Image, sev: usize) -> Image {
    let mut buf = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, JPEG_QUALITY[sev])
        .write_image(&img.to_rgb8(), img.width() as u32, img.height() as u32, image::ExtendedColorType::Rgb8)
        .expect("in-memory JPEG encode");
    Image::decode(&buf).expect("decode of freshly encoded JPEG")
}
