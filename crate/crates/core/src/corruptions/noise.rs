//! Additive Gaussian, Poisson shot, and salt-and-pepper noise.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use crate::image::Image;
use crate::seed::Rng;

const GAUSSIAN: [f32; 5] = [0.08, 0.12, 0.18, 0.26, 0.38];
const SHOT: [f64; 5] = [60.0, 25.0, 12.0, 5.0, 3.0];
const IMPULSE: [f64; 5] = [0.03, 0.06, 0.09, 0.17, 0.27];

pub(super) const TABLE: &str = "gaussian .08 .12 .18 .26 .38; shot 60 25 12 5 3; impulse .03 .06 .09 .17 .27\n";

pub(super) fn gaussian(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let c = GAUSSIAN[sev];
    let normal = Normal::new(0.0f32, 1.0).expect("unit normal");
    let mut out = img.clone();
    for v in out.data_mut() {
        *v += c * normal.sample(rng);
    }
    out
}

pub(super) fn shot(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let c = SHOT[sev];
    let mut out = img.clone();
    for v in out.data_mut() {
        let lambda = (*v as f64).clamp(0.0, 1.0) * c;
        let k = if lambda > 0.0 { Poisson::new(lambda).expect("positive rate").sample(rng) } else { 0.0 };
        *v = (k / c) as f32;
    }
    out
}

/// Each sample independently becomes 0 or 1 with total probability `amount`.
pub(super) fn impulse(img: &Image, sev: usize, rng: &mut Rng) -> Image {
    let amount = IMPULSE[sev];
    let mut out = img.clone();
    for v in out.data_mut() {
        let u: f64 = rng.random();
        let salt: bool = rng.random();
        if u < amount {
            *v = if salt { 1.0 } else { 0.0 };
        }
    }
    out
}
