//! Snow, frost, fog, and brightness.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::procedural::{motion_plane, plasma, zoom_plane, Perlin, Plane};
use super::res_scale;
use crate::image::Image;
use crate::seed::Rng;
use crate::transforms::{luminance, map_hsv};

/// (mean, std, zoom, threshold, motion radius, motion sigma, blend)
const SNOW: [(f64, f64, f64, f32, f64, f64, f32); 5] = [
    (0.1, 0.3, 3.0, 0.5, 10.0, 4.0, 0.8),
    (0.2, 0.3, 2.0, 0.5, 12.0, 4.0, 0.7),
    (0.55, 0.3, 4.0, 0.9, 12.0, 8.0, 0.7),
    (0.55, 0.3, 4.5, 0.85, 12.0, 8.0, 0.65),
    (0.55, 0.3, 2.5, 0.85, 12.0, 12.0, 0.55),
];
/// (image weight, frost weight)
const FROST: [(f32, f32); 5] = [(1.0, 0.4), (0.8, 0.6), (0.7, 0.7), (0.65, 0.7), (0.6, 0.75)];
/// (fog strength, wibble decay)
const FOG: [(f32, f64); 5] = [(1.5, 2.0), (2.0, 2.0), (2.5, 1.7), (2.5, 1.5), (3.0, 1.4)];
const BRIGHTNESS: [f32; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

pub(super) const TABLE: &str = "snow (.1,.3,3,.5,10,4,.8)(.2,.3,2,.5,12,4,.7)(.55,.3,4,.9,12,8,.7)(.55,.3,4.5,.85,12,8,.65)(.55,.3,2.5,.85,12,12,.55); \
frost (1,.4)(.8,.6)(.7,.7)(.65,.7)(.6,.75) perlin-v1; fog (1.5,2)(2,2)(2.5,1.7)(2.5,1.5)(3,1.4); brightness .1 .2 .3 .4 .5\n";

pub(super) fn snow(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let f = res_scale(img);
    let (mean, std, zoom, threshold, radius, sigma, blend) = SNOW[sev];
    let (h, w) = (img.height(), img.width());
    let normal = Normal::new(mean, std).expect("finite snow parameters");
    let layer = Plane::new(h, w, (0..h * w).map(|_| normal.sample(rng) as f32).collect());
    let mut layer = zoom_plane(&layer, zoom);
    for v in &mut layer.v {
        if *v < threshold {
            *v = 0.0;
        }
    }
    let angle = rng.random_range(-135.0..-45.0);
    let layer = motion_plane(&layer, radius * f, sigma * f, angle);
    let flipped = layer.rot180();
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let p = img.get(y, x);
            let lifted = luminance(p) * 1.5 + 0.5;
            let s = layer.at(y, x) + flipped.at(y, x);
            let q = p.map(|v| blend * v + (1.0 - blend) * v.max(lifted) + s);
            out.set(y, x, q);
        }
    }
    out
}

/// Procedural frost: ridged gradient noise with crystalline streaks, pale blue-white.
fn frost_layer(h: usize, w: usize, rng: &mut Rng) -> Image {
    let base = Perlin::new(rng);
    let streak = Perlin::new(rng);
    let (ox, oy) = (rng.random_range(0.0..64.0), rng.random_range(0.0..64.0));
    let scale = 6.0 / h.max(w) as f64;
    Image::from_fn(h, w, |y, x| {
        let (u, v) = (x as f64 * scale + ox, y as f64 * scale + oy);
        let ridge = 1.0 - base.fractal(u, v, 5).abs();
        let crystals = 1.0 - streak.fractal(u * 3.0, v * 0.8, 3).abs();
        let m = (0.55 * ridge.powi(3) + 0.45 * crystals.powi(6)).clamp(0.0, 1.0) as f32;
        [0.78 * m + 0.08, 0.86 * m + 0.09, 0.97 * m + 0.1]
    })
}

pub(super) fn frost(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let (a, b) = FROST[sev];
    let layer = frost_layer(img.height(), img.width(), rng);
    let mut out = img.clone();
    for (o, (&v, &fv)) in out.data_mut().iter_mut().zip(img.data().iter().zip(layer.data())) {
        *o = a * v + b * fv;
    }
    out
}

pub(super) fn fog(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let (strength, decay) = FOG[sev];
    let (h, w) = (img.height(), img.width());
    let size = h.max(w).next_power_of_two().max(32);
    let map = plasma(size, decay, rng);
    let max = img.data().iter().fold(0f32, |m, &v| m.max(v));
    let mut out = img.clone();
    for c in 0..3 {
        let p = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let v = p[y * w + x] + strength * map[y * size + x] as f32;
                p[y * w + x] = v * max / (max + strength);
            }
        }
    }
    out
}

pub(super) fn brightness(img: &Image, sev: usize) -> Image {
    let c = BRIGHTNESS[sev];
    map_hsv(img, |h, s, v| (h, s, (v + c).clamp(0.0, 1.0)))
}
