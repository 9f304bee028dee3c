//! Fifteen-type, five-severity corruption suite.
//!
//! Severity constants are the standard 224-pixel tables. Spatial constants (radii,
//! displacements, sigmas) scale linearly with the image's shorter side.

mod blur;
mod digital;
pub mod manifest;
mod noise;
mod procedural;
mod weather;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::seed;

pub use manifest::{build_corrupted_set, corrupt_in_memory, load_corrupted_set, CorruptedDatasetManifest, CorruptionRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionType {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    DefocusBlur,
    GlassBlur,
    MotionBlur,
    ZoomBlur,
    Snow,
    Frost,
    Fog,
    Brightness,
    Contrast,
    Elastic,
    Pixelate,
    Jpeg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Noise,
    Blur,
    Weather,
    Digital,
}

impl CorruptionType {
    pub const ALL: [CorruptionType; 15] = [
        Self::GaussianNoise,
        Self::ShotNoise,
        Self::ImpulseNoise,
        Self::DefocusBlur,
        Self::GlassBlur,
        Self::MotionBlur,
        Self::ZoomBlur,
        Self::Snow,
        Self::Frost,
        Self::Fog,
        Self::Brightness,
        Self::Contrast,
        Self::Elastic,
        Self::Pixelate,
        Self::Jpeg,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianNoise => "gaussian_noise",
            Self::ShotNoise => "shot_noise",
            Self::ImpulseNoise => "impulse_noise",
            Self::DefocusBlur => "defocus_blur",
            Self::GlassBlur => "glass_blur",
            Self::MotionBlur => "motion_blur",
            Self::ZoomBlur => "zoom_blur",
            Self::Snow => "snow",
            Self::Frost => "frost",
            Self::Fog => "fog",
            Self::Brightness => "brightness",
            Self::Contrast => "contrast",
            Self::Elastic => "elastic",
            Self::Pixelate => "pixelate",
            Self::Jpeg => "jpeg",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|t| t == self).expect("registered")
    }

    pub fn family(&self) -> Family {
        match self.index() {
            0..=2 => Family::Noise,
            3..=6 => Family::Blur,
            7..=10 => Family::Weather,
            _ => Family::Digital,
        }
    }
}

impl FromStr for CorruptionType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| Error::UnknownCorruption(s.to_string()))
    }
}

impl fmt::Display for CorruptionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    #[serde(rename = "type")]
    pub kind: CorruptionType,
    pub severity: u8,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionType, severity: u8, seed: u64) -> Result<Self> {
        if !(1..=5).contains(&severity) {
            return Err(Error::Argument(format!("severity {severity} outside 1..=5")));
        }
        Ok(Self { kind, severity, seed })
    }
}

/// Applies one corruption. Deterministic in `(img, spec)`.
pub fn corrupt(img: &Image, spec: &CorruptionSpec) -> Result<Image> {
    if !(1..=5).contains(&spec.severity) {
        return Err(Error::Argument(format!("severity {} outside 1..=5", spec.severity)));
    }
    let sev = spec.severity as usize - 1;
    // Severity is not mixed into the stream, so noise draws nest across severities.
    let mut rng = seed::rng_for(spec.seed, &[seed::tag(spec.kind.name())]);
    let out = match spec.kind {
        CorruptionType::GaussianNoise => noise::gaussian(img, sev, &mut rng),
        CorruptionType::ShotNoise => noise::shot(img, sev, &mut rng),
        CorruptionType::ImpulseNoise => noise::impulse(img, sev, &mut rng),
        CorruptionType::DefocusBlur => blur::defocus(img, sev),
        CorruptionType::GlassBlur => blur::glass(img, sev, &mut rng),
        CorruptionType::MotionBlur => blur::motion(img, sev, &mut rng),
        CorruptionType::ZoomBlur => blur::zoom(img, sev),
        CorruptionType::Snow => weather::snow(img, sev, &mut rng),
        CorruptionType::Frost => weather::frost(img, sev, &mut rng),
        CorruptionType::Fog => weather::fog(img, sev, &mut rng),
        CorruptionType::Brightness => weather::brightness(img, sev),
        CorruptionType::Contrast => digital::contrast(img, sev),
        CorruptionType::Elastic => digital::elastic(img, sev, &mut rng),
        CorruptionType::Pixelate => digital::pixelate(img, sev),
        CorruptionType::Jpeg => digital::jpeg(img, sev),
    };
    Ok(out.clamp01())
}

/// Ratio of the image's shorter side to the 224-pixel reference.
pub(crate) fn res_scale(img: &Image) -> f64 {
    img.height().min(img.width()) as f64 / 224.0
}

/// Hash of the severity tables and the type order; changes whenever any constant does.
pub fn registry_version() -> String {
    let mut h = Sha256::new();
    for t in CorruptionType::ALL {
        h.update(t.name().as_bytes());
        h.update(b"\n");
    }
    h.update(noise::TABLE.as_bytes());
    h.update(blur::TABLE.as_bytes());
    h.update(weather::TABLE.as_bytes());
    h.update(digital::TABLE.as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// `all` or a comma-separated list of type names.
pub fn parse_types(text: &str) -> Result<Vec<CorruptionType>> {
    if text.trim() == "all" {
        return Ok(CorruptionType::ALL.to_vec());
    }
    text.split(',').map(|s| s.trim().parse()).collect()
}

/// `1-5`, `3`, or `1,3,5`.
pub fn parse_severities(text: &str) -> Result<Vec<u8>> {
    let bad = || Error::Argument(format!("cannot parse severities `{text}` (use e.g. 1-5 or 1,3,5)"));
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (u8, u8) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() || out.iter().any(|s| !(1..=5).contains(s)) {
        return Err(bad());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::luma_plane;

    pub(crate) fn fixture(side: usize, phase: f32) -> Image {
        Image::from_fn(side, side, |y, x| {
            let (yf, xf) = (y as f32, x as f32);
            let check = if ((x / 6) + (y / 6)) % 2 == 0 { 0.75 } else { 0.3 };
            [
                (0.5 + 0.35 * (xf * 0.23 + phase).sin()).clamp(0.0, 1.0),
                (0.45 + 0.3 * (yf * 0.19 - phase).cos()).clamp(0.0, 1.0),
                check,
            ]
        })
    }

    fn l2(a: &Image, b: &Image) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
    }

    fn psnr(a: &Image, b: &Image) -> f64 {
        let mse = l2(a, b).powi(2) / a.data().len() as f64;
        10.0 * (1.0 / mse.max(1e-12)).log10()
    }

    #[test]
    fn every_type_is_deterministic_and_not_identity() {
        for side in [32, 64] {
            let img = fixture(side, 0.4).quantized();
            for t in CorruptionType::ALL {
                for sev in 1..=5 {
                    let spec = CorruptionSpec::new(t, sev, 17).unwrap();
                    let a = corrupt(&img, &spec).unwrap();
                    let b = corrupt(&img, &spec).unwrap();
                    assert_eq!(a, b, "{t} s{sev} not deterministic");
                    assert!(a.is_finite() && a.data().iter().all(|v| (0.0..=1.0).contains(v)));
                    assert_ne!(a.quantized(), img, "{t} s{sev} at {side}px is identity");
                }
            }
        }
    }

    #[test]
    fn brightness_mean_increases() {
        let img = fixture(64, 1.0);
        let means: Vec<f64> = (1..=5)
            .map(|s| {
                let out = corrupt(&img, &CorruptionSpec::new(CorruptionType::Brightness, s, 0).unwrap()).unwrap();
                luma_plane(&out).iter().map(|&v| v as f64).sum::<f64>()
            })
            .collect();
        assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
    }

    #[test]
    fn jpeg_psnr_decreases_with_severity() {
        let img = fixture(64, 0.2);
        let p1 = psnr(&img, &corrupt(&img, &CorruptionSpec::new(CorruptionType::Jpeg, 1, 0).unwrap()).unwrap());
        let p5 = psnr(&img, &corrupt(&img, &CorruptionSpec::new(CorruptionType::Jpeg, 5, 0).unwrap()).unwrap());
        assert!(p5 < p1, "psnr s5 {p5} vs s1 {p1}");
    }

    #[test]
    fn noise_distance_is_monotone() {
        for phase in [0.0, 0.9, 2.1] {
            let img = fixture(48, phase);
            for t in [CorruptionType::GaussianNoise, CorruptionType::ShotNoise, CorruptionType::ImpulseNoise] {
                let d: Vec<f64> =
                    (1..=5).map(|s| l2(&img, &corrupt(&img, &CorruptionSpec::new(t, s, 3).unwrap()).unwrap())).collect();
                assert!(d.windows(2).all(|w| w[1] >= w[0]), "{t}: {d:?}");
            }
        }
    }

    #[test]
    fn registry_and_parsing() {
        assert!(matches!("blizzard".parse::<CorruptionType>(), Err(Error::UnknownCorruption(_))));
        assert!(CorruptionSpec::new(CorruptionType::Fog, 6, 0).is_err());
        assert_eq!(parse_types("all").unwrap().len(), 15);
        assert_eq!(parse_severities("1-5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_severities("1,3,5").unwrap(), vec![1, 3, 5]);
        assert!(parse_severities("0-2").is_err());
        assert_eq!(registry_version(), registry_version());
        let families: Vec<Family> = CorruptionType::ALL.iter().map(|t| t.family()).collect();
        assert_eq!(families.iter().filter(|f| **f == Family::Noise).count(), 3);
        assert_eq!(families.iter().filter(|f| **f == Family::Digital).count(), 4);
    }
}
