//! Multi-view augmentation. Standard pipelines for both learner families, and the
//! curriculum pipeline (crop and flip, then the stage's saturation blend and blur).

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::Image;
use crate::schedule::{DietParams, LearnerKind};
use crate::seed::{self, Rng};
use crate::transforms::{self, CropBox};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Global,
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterRecord {
    pub brightness: f32,
    pub contrast: f32,
    pub saturation: f32,
    pub hue: f32,
    /// Application order of (brightness, contrast, saturation, hue).
    pub order: [u8; 4],
}

/// Curriculum parameters actually applied to a view (blur at the view's resolution).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DietRecord {
    pub stage: Option<usize>,
    pub s: f64,
    pub sigma: f64,
    pub kernel: u32,
}

/// Everything needed to reproduce one augmented view from its source frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub kind: ViewKind,
    /// `[top, left, height, width]` in source pixels.
    pub crop: [f64; 4],
    pub size: usize,
    pub flip: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<JitterRecord>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub grayscale: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diet: Option<DietRecord>,
}

#[derive(Clone, Debug)]
pub struct AugmentedViews {
    pub source_id: String,
    pub views: Vec<Image>,
    pub records: Vec<ViewRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub global_size: usize,
    pub local_size: usize,
    pub local_views: usize,
    pub contrastive_views: usize,
    pub contrastive_scale: (f64, f64),
    pub global_scale: (f64, f64),
    pub local_scale: (f64, f64),
}

impl ViewConfig {
    pub fn for_resolution(side: usize) -> Self {
        Self {
            global_size: side,
            local_size: (side / 2).max(8),
            local_views: 6,
            contrastive_views: 2,
            contrastive_scale: (0.2, 1.0),
            global_scale: (0.4, 1.0),
            local_scale: (0.05, 0.4),
        }
    }

    /// `(kind, output side, crop scale range)` for every view of one frame.
    pub fn plan(&self, learner: LearnerKind) -> Vec<(ViewKind, usize, (f64, f64))> {
        match learner {
            LearnerKind::Contrastive => {
                vec![(ViewKind::Global, self.global_size, self.contrastive_scale); self.contrastive_views]
            }
            LearnerKind::Distillation => {
                let mut v = vec![(ViewKind::Global, self.global_size, self.global_scale); 2];
                v.extend(vec![(ViewKind::Local, self.local_size, self.local_scale); self.local_views]);
                v
            }
        }
    }
}

/// Area-and-aspect random crop; falls back to the largest centered crop.
pub fn random_resized_crop_box(rng: &mut Rng, h: usize, w: usize, scale: (f64, f64)) -> CropBox {
    let area = (h * w) as f64;
    let (lr0, lr1) = ((3.0f64 / 4.0).ln(), (4.0f64 / 3.0).ln());
    for _ in 0..10 {
        let target = area * rng.random_range(scale.0..=scale.1);
        let ratio = rng.random_range(lr0..=lr1).exp();
        let cw = (target * ratio).sqrt();
        let ch = (target / ratio).sqrt();
        if cw >= 1.0 && ch >= 1.0 && cw <= w as f64 && ch <= h as f64 {
            let top = rng.random_range(0.0..=(h as f64 - ch));
            let left = rng.random_range(0.0..=(w as f64 - cw));
            return (top, left, ch, cw);
        }
    }
    let side = h.min(w) as f64;
    ((h as f64 - side) / 2.0, (w as f64 - side) / 2.0, side, side)
}

fn geometric(img: &Image, rng: &mut Rng, kind: ViewKind, size: usize, scale: (f64, f64)) -> (Image, ViewRecord) {
    let crop = random_resized_crop_box(rng, img.height(), img.width(), scale);
    let flip = rng.random_bool(0.5);
    let mut out = transforms::resized_crop(img, crop, size, size);
    if flip {
        out = transforms::hflip(&out);
    }
    let record = ViewRecord {
        kind,
        crop: [crop.0, crop.1, crop.2, crop.3],
        size,
        flip,
        jitter: None,
        grayscale: false,
        blur_sigma: None,
        diet: None,
    };
    (out, record)
}

/// Odd kernel of roughly a tenth of the view side.
pub fn sdiet_blur_kernel(size: usize) -> usize {
    ((size as f64 * 0.1).round() as usize | 1).max(3)
}

fn photometric(mut img: Image, rng: &mut Rng, record: &mut ViewRecord) -> Image {
    if rng.random_bool(0.8) {
        let mut order = [0u8, 1, 2, 3];
        order.shuffle(rng);
        let j = JitterRecord {
            brightness: rng.random_range(0.6..=1.4),
            contrast: rng.random_range(0.6..=1.4),
            saturation: rng.random_range(0.6..=1.4),
            hue: rng.random_range(-0.1..=0.1),
            order,
        };
        for op in order {
            img = match op {
                0 => transforms::adjust_brightness(&img, j.brightness),
                1 => transforms::adjust_contrast(&img, j.contrast),
                2 => transforms::adjust_saturation(&img, j.saturation),
                _ => transforms::adjust_hue(&img, j.hue),
            };
        }
        record.jitter = Some(j);
    }
    if rng.random_bool(0.2) {
        img = transforms::to_grayscale(&img);
        record.grayscale = true;
    }
    if rng.random_bool(0.5) {
        let sigma = rng.random_range(0.1..=2.0) * record.size as f64 / transforms::REFERENCE_SIDE;
        let k = sdiet_blur_kernel(record.size).min(record.size);
        img = transforms::gaussian_blur(&img, sigma, k).expect("odd kernel within view");
        record.blur_sigma = Some(sigma);
    }
    img
}

/// Standard stochastic views: crop, flip, color jitter, random grayscale, random blur.
pub fn sdiet_views(img: &Image, source_id: &str, learner: LearnerKind, cfg: &ViewConfig, rng_seed: u64) -> AugmentedViews {
    let mut views = Vec::new();
    let mut records = Vec::new();
    for (i, (kind, size, scale)) in cfg.plan(learner).into_iter().enumerate() {
        let mut rng = seed::rng_for(rng_seed, &[seed::tag("sdiet"), i as u64]);
        let (v, mut rec) = geometric(img, &mut rng, kind, size, scale);
        let v = photometric(v, &mut rng, &mut rec);
        views.push(v);
        records.push(rec);
    }
    AugmentedViews { source_id: source_id.to_string(), views, records }
}

/// Curriculum views: crop and flip, then the diet blend and blur. `draw` maps a per-view
/// seed to `(stage, reference-resolution parameters)`.
pub fn diet_views(
    img: &Image,
    source_id: &str,
    learner: LearnerKind,
    cfg: &ViewConfig,
    rng_seed: u64,
    draw: &dyn Fn(u64) -> Result<(Option<usize>, DietParams)>,
) -> Result<AugmentedViews> {
    let mut views = Vec::new();
    let mut records = Vec::new();
    for (i, (kind, size, scale)) in cfg.plan(learner).into_iter().enumerate() {
        let mut rng = seed::rng_for(rng_seed, &[seed::tag("diet-view"), i as u64]);
        let (v, mut rec) = geometric(img, &mut rng, kind, size, scale);
        let (stage, params) = draw(seed::derive(rng_seed, &[seed::tag("diet-draw"), i as u64]))?;
        let used = transforms::scaled_params(&params, &v);
        let v = transforms::apply_diet_params(&v, &used)?;
        rec.diet = Some(DietRecord { stage, s: used.s, sigma: used.sigma, kernel: used.kernel });
        views.push(v);
        records.push(rec);
    }
    Ok(AugmentedViews { source_id: source_id.to_string(), views, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{build_catdiet, derive_baseline, BaselineKind};

    fn fixture() -> Image {
        Image::from_fn(64, 64, |y, x| [x as f32 / 63.0, y as f32 / 63.0, ((x * y) % 17) as f32 / 16.0])
    }

    #[test]
    fn view_counts_and_determinism() {
        let cfg = ViewConfig::for_resolution(64);
        let img = fixture();
        let a = sdiet_views(&img, "f0", LearnerKind::Contrastive, &cfg, 5);
        let b = sdiet_views(&img, "f0", LearnerKind::Contrastive, &cfg, 5);
        assert_eq!(a.views.len(), 2);
        assert_eq!(a.views, b.views);
        assert_eq!(a.records, b.records);
        let d = sdiet_views(&img, "f0", LearnerKind::Distillation, &cfg, 5);
        let globals = d.records.iter().filter(|r| r.kind == ViewKind::Global).count();
        assert_eq!((globals, d.records.len() - globals), (2, 6));
        assert!(d.views.iter().zip(&d.records).all(|(v, r)| v.height() == r.size));
        assert!(a.records.iter().all(|r| r.diet.is_none()));
    }

    #[test]
    fn crops_respect_bounds_and_scale() {
        let mut rng = seed::rng(1);
        for _ in 0..500 {
            let (t, l, h, w) = random_resized_crop_box(&mut rng, 64, 48, (0.2, 1.0));
            assert!(t >= 0.0 && l >= 0.0 && t + h <= 64.0 + 1e-9 && l + w <= 48.0 + 1e-9);
            assert!(h * w >= 0.2 * 64.0 * 48.0 - 1e-6 || (h == 48.0 && w == 48.0));
        }
    }

    #[test]
    fn diet_views_record_parameters() {
        let cfg = ViewConfig::for_resolution(64);
        let sampler = derive_baseline(&build_catdiet(30).unwrap(), BaselineKind::None);
        let draw = |s: u64| sampler.draw(0, s);
        let v = diet_views(&fixture(), "f1", LearnerKind::Contrastive, &cfg, 9, &draw).unwrap();
        for r in &v.records {
            let d = r.diet.as_ref().unwrap();
            assert_eq!(d.stage, Some(0));
            assert!(d.s > 0.2 && d.s <= 0.36);
            assert_eq!(d.kernel, 7);
            assert!(r.jitter.is_none() && r.blur_sigma.is_none());
        }
        let json = serde_json::to_string(&v.records[0]).unwrap();
        assert!(json.contains("\"diet\""));
    }
}
