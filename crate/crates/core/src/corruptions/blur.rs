//! Defocus, glass, motion, and zoom blur.

use rand::Rng as _;

use super::procedural::{convolve2d, from_planes, gaussian_image, motion_plane, planes, zoom_plane};
use super::res_scale;
use crate::image::Image;
use crate::seed::Rng;

/// (disk radius, alias sigma)
const DEFOCUS: [(f64, f64); 5] = [(3.0, 0.1), (4.0, 0.5), (6.0, 0.5), (8.0, 0.5), (10.0, 0.5)];
/// (sigma, max displacement, iterations)
const GLASS: [(f64, f64, usize); 5] = [(0.7, 1.0, 2), (0.9, 2.0, 1), (1.0, 2.0, 3), (1.1, 3.0, 2), (1.5, 4.0, 2)];
/// (radius, sigma)
const MOTION: [(f64, f64); 5] = [(10.0, 3.0), (15.0, 5.0), (15.0, 8.0), (15.0, 12.0), (20.0, 15.0)];
/// (last zoom factor, step): factors `1, 1+step, ...` below the bound.
const ZOOM: [(f64, f64); 5] = [(1.11, 0.01), (1.16, 0.01), (1.21, 0.02), (1.26, 0.02), (1.31, 0.03)];

pub(super) const TABLE: &str = "defocus (3,.1)(4,.5)(6,.5)(8,.5)(10,.5); glass (.7,1,2)(.9,2,1)(1,2,3)(1.1,3,2)(1.5,4,2); \
motion (10,3)(15,5)(15,8)(15,12)(20,15); zoom 1.11/.01 1.16/.01 1.21/.02 1.26/.02 1.31/.03\n";

/// Anti-aliased disk of `radius` pixels, smoothed by a small Gaussian, normalized.
fn disk_kernel(radius: f64, alias_sigma: f64) -> (Vec<f64>, usize) {
    let r = radius.ceil() as isize + 1;
    let n = (2 * r + 1) as usize;
    let mut k = vec![0f64; n * n];
    for y in -r..=r {
        for x in -r..=r {
            let d = ((x * x + y * y) as f64).sqrt();
            k[((y + r) as usize) * n + (x + r) as usize] = (radius + 0.5 - d).clamp(0.0, 1.0);
        }
    }
    if alias_sigma > 0.0 {
        let g: Vec<f64> = (-1..=1).map(|i: i32| (-(i * i) as f64 / (2.0 * alias_sigma * alias_sigma)).exp()).collect();
        let mut sm = vec![0f64; n * n];
        for y in 0..n {
            for x in 0..n {
                let mut acc = 0.0;
                for (dy, gy) in g.iter().enumerate() {
                    for (dx, gx) in g.iter().enumerate() {
                        let (sy, sx) = (y as isize + dy as isize - 1, x as isize + dx as isize - 1);
                        if (0..n as isize).contains(&sy) && (0..n as isize).contains(&sx) {
                            acc += gy * gx * k[sy as usize * n + sx as usize];
                        }
                    }
                }
                sm[y * n + x] = acc;
            }
        }
        k = sm;
    }
    let total: f64 = k.iter().sum();
    (k.into_iter().map(|v| v / total).collect(), n)
}

pub(super) fn defocus(img: &Image, sev: usize) -> Image {
    let f = res_scale(img);
    let (radius, alias) = DEFOCUS[sev];
    // Below ~0.75 px the disk covers only its center tap.
    let (k, n) = disk_kernel((radius * f).max(0.75), alias * f);
    convolve2d(img, &k, n, n)
}

/// Blur, then locally shuffle pixels by swapping with random neighbors, then blur again.
pub(super) fn glass(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let f = res_scale(img);
    let (sigma, delta, iterations) = GLASS[sev];
    let d = (delta * f).round().max(1.0) as isize;
    let iterations = ((iterations as f64 * f).round() as usize).max(1);
    let mut x = gaussian_image(img, sigma * f);
    let (h, w) = (img.height() as isize, img.width() as isize);
    for _ in 0..iterations {
        for y in (d + 1..=h - d - 1).rev() {
            for xx in (d + 1..=w - d - 1).rev() {
                let dx = rng.random_range(-d as i64..=d as i64) as isize;
                let dy = rng.random_range(-d as i64..=d as i64) as isize;
                let (ny, nx) = ((y + dy) as usize, (xx + dx) as usize);
                let a = x.get(y as usize, xx as usize);
                let b = x.get(ny, nx);
                x.set(y as usize, xx as usize, b);
                x.set(ny, nx, a);
            }
        }
    }
    gaussian_image(&x, sigma * f)
}

pub(super) fn motion(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let f = res_scale(img);
    let (radius, sigma) = MOTION[sev];
    let angle = rng.random_range(-45.0..45.0);
    from_planes(planes(img).map(|p| motion_plane(&p, radius * f, sigma * f, angle)))
}

pub(super) fn zoom(img: &Image, sev: usize) -> Image {
    let (bound, step) = ZOOM[sev];
    let factors: Vec<f64> = (0..).map(|i| 1.0 + i as f64 * step).take_while(|z| *z < bound - 1e-9).collect();
    let ps = planes(img);
    let mut acc: Vec<Vec<f64>> = ps.iter().map(|p| p.v.iter().map(|&v| v as f64).collect()).collect();
    for &z in &factors {
        for (c, p) in ps.iter().enumerate() {
            for (a, v) in acc[c].iter_mut().zip(zoom_plane(p, z).v) {
                *a += v as f64;
            }
        }
    }
    let n = (factors.len() + 1) as f64;
    let mut out = img.clone();
    for (c, a) in acc.iter().enumerate() {
        for (o, v) in out.plane_mut(c).iter_mut().zip(a) {
            *o = (v / n) as f32;
        }
    }
    out
}
