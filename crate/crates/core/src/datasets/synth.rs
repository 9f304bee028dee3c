//! Procedural generators. Every output is a pure function of its seed.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::raster::{self, rot_x, rot_y, rot_z, Camera, Frame, HPlane, Light, Mesh, Transform, V3, IDENTITY3};
use super::shapes::{self, ShapeFamily, Texture, TextureFamily, N_CLASSES};
use super::{DepthAnswer, ImageDataset, LabeledImage, VideoClip, VideoDataset, DEPTH_CLASSES};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::seed::{self, Rng};
use crate::transforms::hsv_to_rgb;

const SSAA: usize = 2;
const OBJECT_SURFACE: u32 = 1;

fn muted(rng: &mut Rng, lo: f32, hi: f32) -> [f64; 3] {
    hsv_to_rgb(rng.random_range(0.0..1.0), rng.random_range(0.05..0.35), rng.random_range(lo..hi)).map(|v| v as f64)
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * t)
}

fn random_light(rng: &mut Rng) -> Light {
    let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let el: f64 = rng.random_range(0.5..1.2);
    Light { direction: [el.cos() * az.cos(), el.sin(), el.cos() * az.sin()], ambient: 0.35 }
}

/// Per-instance appearance of a turntable object.
struct Instance {
    family: ShapeFamily,
    texture: Texture,
    scale: f64,
    tilt: (f64, f64),
    azimuth0: f64,
    camera: Camera,
    light: Light,
    background: ([f64; 3], [f64; 3], u64),
}

impl Instance {
    fn random(family: ShapeFamily, texture: TextureFamily, resolution: usize, rng: &mut Rng) -> Self {
        let texture = Texture::random(texture, rng);
        let elevation: f64 = rng.random_range(12.0f64..35.0).to_radians();
        let dist = rng.random_range(3.4..4.0);
        let eye = [0.0, dist * elevation.sin(), -dist * elevation.cos()];
        let side = resolution * SSAA;
        Self {
            family,
            texture,
            scale: rng.random_range(0.85..1.1),
            tilt: (rng.random_range(-0.35..0.35), rng.random_range(-0.2..0.2)),
            azimuth0: rng.random_range(0.0..360.0),
            camera: Camera::look_at(eye, [0.0; 3], 36.0, side, side),
            light: random_light(rng),
            background: (muted(rng, 0.55, 0.9), muted(rng, 0.25, 0.6), rng.random()),
        }
    }

    fn transform(&self, azimuth_deg: f64) -> Transform {
        let r = raster::mat_mul(&rot_y((self.azimuth0 + azimuth_deg).to_radians()), &raster::mat_mul(&rot_x(self.tilt.0), &rot_z(self.tilt.1)));
        Transform::new(r, self.scale, [0.0; 3])
    }

    fn frame(&self, azimuth_deg: f64, material: &dyn Fn(f64, f64) -> [f64; 3]) -> Frame {
        let mut f = Frame::new(self.camera.clone());
        let (top, bottom, nseed) = self.background;
        f.fill_background(|u, v| {
            let n = shapes::value_noise(nseed, u * 4.0, v * 4.0) - 0.5;
            lerp3(top, bottom, v).map(|c| (c + 0.12 * n).clamp(0.0, 1.0))
        });
        f.draw_mesh(&self.family.mesh(), &self.transform(azimuth_deg), OBJECT_SURFACE, &self.light, material);
        f
    }

    fn render(&self, azimuth_deg: f64) -> Image {
        self.frame(azimuth_deg, &|u, v| self.texture.sample(u, v)).resolve(SSAA)
    }
}

/// Turntable videos of textured primitives, one shape family per class, a full 360 degrees
/// per clip. Frame times are azimuth offsets in degrees.
pub fn gen_rotation_videos(
    n_classes: usize,
    videos_per_class: usize,
    frames_per_video: usize,
    resolution: usize,
    rng_seed: u64,
) -> Result<VideoDataset> {
    if !(2..=N_CLASSES).contains(&n_classes) {
        return Err(Error::Argument(format!("n_classes must be in 2..={N_CLASSES}, got {n_classes}")));
    }
    if frames_per_video < 2 || resolution < 8 {
        return Err(Error::Argument("need at least 2 frames per video and 8-pixel resolution".into()));
    }
    let mut clips = Vec::with_capacity(n_classes * videos_per_class);
    for c in 0..n_classes {
        for v in 0..videos_per_class {
            let mut rng = seed::rng_for(rng_seed, &[seed::tag("rotation"), c as u64, v as u64]);
            let inst = Instance::random(ShapeFamily::ALL[c], TextureFamily::ALL[c], resolution, &mut rng);
            let times: Vec<f64> = (0..frames_per_video).map(|k| 360.0 * k as f64 / frames_per_video as f64).collect();
            let frames = times.iter().map(|&az| inst.render(az)).collect();
            clips.push(VideoClip::new(format!("rot-{rng_seed:x}-c{c}-v{v:03}"), Some(c), frames, times)?);
        }
    }
    Ok(VideoDataset { name: "rotation".into(), class_names: shapes::class_names(n_classes), clips })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    DepthOrder,
    CliffView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub eye: V3,
    pub target: V3,
    pub fov_deg: f64,
}

impl CameraPose {
    pub fn camera(&self, side: usize) -> Camera {
        Camera::look_at(self.eye, self.target, self.fov_deg, side, side)
    }
}

/// Minimum relative distance gap between arrow and ball.
pub const MIN_DEPTH_GAP: f64 = 0.05;

/// Arrow marker and ball placed in 3-D. `arrow` is the arrow's tip (its ground contact),
/// `ball` is the ball's center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub arrow: V3,
    pub ball: V3,
    pub camera: CameraPose,
    pub label: DepthAnswer,
    pub kind: SceneKind,
}

impl SceneSpec {
    pub fn new(rng_seed: u64, arrow: V3, ball: V3, camera: CameraPose, kind: SceneKind) -> Result<Self> {
        let (da, db) = (raster::distance(arrow, camera.eye), raster::distance(ball, camera.eye));
        if (da - db).abs() < MIN_DEPTH_GAP * da.max(db) {
            return Err(Error::Argument(format!("arrow ({da:.3} m) and ball ({db:.3} m) distances are within 5%")));
        }
        Ok(Self { seed: rng_seed, arrow, ball, camera, label: DepthAnswer::from_bool(da < db), kind })
    }

    pub fn arrow_distance(&self) -> f64 {
        raster::distance(self.arrow, self.camera.eye)
    }

    pub fn ball_distance(&self) -> f64 {
        raster::distance(self.ball, self.camera.eye)
    }

    /// Swaps the two objects' ground positions, flipping the label. Fails if the swap
    /// (heights differ) brings the distances within the tie margin.
    pub fn mirrored(&self) -> Result<Self> {
        let arrow = [self.ball[0], self.arrow[1], self.ball[2]];
        let ball = [self.arrow[0], self.ball[1], self.arrow[2]];
        Self::new(self.seed, arrow, ball, self.camera.clone(), self.kind)
    }

    /// Rejection-sampled depth-order scene; the label is a fair coin.
    pub fn random(rng_seed: u64) -> Self {
        let mut rng = seed::rng_for(rng_seed, &[seed::tag("depth-scene")]);
        let want_yes = rng.random_bool(0.5);
        let height = rng.random_range(1.1..1.7);
        let camera = CameraPose { eye: [0.0, height, 0.0], target: [rng.random_range(-0.2..0.2), 0.0, 3.6], fov_deg: 55.0 };
        let cam = camera.camera(100);
        let visible = |p: V3| match cam.project(p) {
            Some((x, y, _)) => (8.0..92.0).contains(&x) && (8.0..92.0).contains(&y),
            None => false,
        };
        loop {
            let mut place = |r: f64| -> V3 {
                let z: f64 = rng.random_range(1.8..6.5);
                [rng.random_range(-0.45..0.45) * z, r, z]
            };
            let (a, b) = (place(0.0), place(BALL_RADIUS));
            let apart = ((a[0] - b[0]).powi(2) + (a[2] - b[2]).powi(2)).sqrt() > 0.6;
            if !apart || !visible(a) || !visible(b) || !visible([a[0], ARROW_HEIGHT, a[2]]) {
                continue;
            }
            let Ok(spec) = Self::new(rng_seed, a, b, camera.clone(), SceneKind::DepthOrder) else { continue };
            if (spec.label == DepthAnswer::Yes) == want_yes {
                return spec;
            }
            if let Ok(m) = spec.mirrored() {
                return m;
            }
        }
    }
}

const BALL_RADIUS: f64 = 0.18;
const ARROW_HEIGHT: f64 = 0.6;
const GREEN: [f64; 3] = [0.1, 0.75, 0.15];
const RED: [f64; 3] = [0.85, 0.08, 0.06];

/// Downward-pointing arrow of total height `h`, tip at the origin.
fn arrow_mesh(h: f64) -> Mesh {
    let head = h * 0.5;
    let mut m = shapes::cone(h * 0.22, head, 16);
    // Flip so the tip points down, then lift the base to `head`.
    for v in &mut m.vertices {
        v.pos[1] = head / 2.0 - v.pos[1];
    }
    let mut shaft = shapes::cylinder(h * 0.08, h - head, 12);
    for v in &mut shaft.vertices {
        v.pos[1] += head + (h - head) / 2.0;
    }
    m.append(&shaft);
    m
}

fn draw_markers(f: &mut Frame, spec: &SceneSpec, arrow_h: f64, ball_r: f64, light: &Light) {
    f.draw_mesh(&arrow_mesh(arrow_h), &Transform::new(IDENTITY3, 1.0, spec.arrow), 10, light, &|_, _| GREEN);
    f.draw_mesh(&shapes::sphere(ball_r, 12, 20), &Transform::new(IDENTITY3, 1.0, spec.ball), 11, light, &|_, _| RED);
}

fn sky(f: &mut Frame, rng: &mut Rng) {
    let (top, horizon) = (muted(rng, 0.75, 0.95), muted(rng, 0.55, 0.8));
    f.fill_background(|_, v| lerp3(top, horizon, v));
}

/// Renders a depth-order scene over a textured ground plane.
pub fn gen_depth_scene(spec: &SceneSpec, resolution: usize) -> Result<(Image, DepthAnswer)> {
    if spec.kind != SceneKind::DepthOrder {
        return Err(Error::Argument("gen_depth_scene expects a depth_order scene".into()));
    }
    let mut rng = seed::rng_for(spec.seed, &[seed::tag("depth-render")]);
    let mut f = Frame::new(spec.camera.camera(resolution * SSAA));
    sky(&mut f, &mut rng);
    let (a, b) = (muted(&mut rng, 0.45, 0.7), muted(&mut rng, 0.3, 0.5));
    let period = rng.random_range(0.4..0.7);
    let grain = rng.random::<u64>();
    f.draw_plane(&HPlane { height: 0.0, z_min: f64::NEG_INFINITY, z_max: f64::INFINITY }, 2, 1.0, &|x, z| {
        let check = ((x / period).floor() + (z / period).floor()).rem_euclid(2.0) < 1.0;
        let n = 0.1 * (shapes::value_noise(grain, x * 3.0, z * 3.0) - 0.5);
        (if check { a } else { b }).map(|c| (c + n).clamp(0.0, 1.0))
    });
    let light = Light { direction: raster::normalize([0.3, 1.0, -0.4]), ambient: 0.4 };
    draw_markers(&mut f, spec, ARROW_HEIGHT, BALL_RADIUS, &light);
    Ok((f.resolve(SSAA), spec.label))
}

/// `n` random depth-order scenes as a binary (`no`, `yes`) dataset.
pub fn gen_depth_dataset(n: usize, resolution: usize, rng_seed: u64) -> Result<ImageDataset> {
    let items = (0..n)
        .map(|i| {
            let spec = SceneSpec::random(seed::derive(rng_seed, &[i as u64]));
            let (image, label) = gen_depth_scene(&spec, resolution)?;
            Ok(LabeledImage { id: format!("depth-{rng_seed:x}-{i:04}"), image, label: label.index(), texture_label: None })
        })
        .collect::<Result<_>>()?;
    Ok(ImageDataset { name: "depth".into(), class_names: DEPTH_CLASSES.map(String::from).to_vec(), items })
}

/// Visual-cliff geometry. The glass is at `y = 0`; the shallow plane lies `shallow_depth`
/// below it for `z < edge_z`, the deep plane `deep_depth` below it beyond the edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffConfig {
    pub shallow_depth: f64,
    pub deep_depth: f64,
    pub checker: f64,
    pub edge_z: f64,
    pub arrow_z: f64,
    pub ball_z: f64,
    pub camera_heights: [f64; 3],
    pub tilts_deg: [f64; 3],
    pub fov_deg: f64,
    pub resolution: usize,
}

impl Default for CliffConfig {
    fn default() -> Self {
        Self {
            shallow_depth: 0.05,
            deep_depth: 1.2,
            checker: 0.1,
            edge_z: 0.6,
            arrow_z: 0.35,
            ball_z: 2.4,
            camera_heights: [0.35, 0.42, 0.5],
            tilts_deg: [38.0, 42.0, 46.0],
            fov_deg: 62.0,
            resolution: 64,
        }
    }
}

const CLIFF_ARROW: f64 = 0.2;
const CLIFF_BALL: f64 = 0.14;

impl CliffConfig {
    pub fn pose(&self, view: usize) -> CameraPose {
        let (h, t) = (self.camera_heights[view], self.tilts_deg[view].to_radians());
        CameraPose { eye: [0.0, h, 0.0], target: [0.0, h - t.sin(), t.cos()], fov_deg: self.fov_deg }
    }

    pub fn shallow_plane(&self) -> HPlane {
        HPlane { height: -self.shallow_depth, z_min: f64::NEG_INFINITY, z_max: self.edge_z }
    }

    pub fn deep_plane(&self) -> HPlane {
        HPlane { height: -self.deep_depth, z_min: self.edge_z, z_max: f64::INFINITY }
    }

    pub fn spec(&self, view: usize, rng_seed: u64) -> Result<SceneSpec> {
        let mut rng = seed::rng_for(rng_seed, &[seed::tag("cliff-place"), view as u64]);
        let arrow = [rng.random_range(-0.08..0.08), -self.shallow_depth, self.arrow_z];
        let ball = [rng.random_range(-0.25..0.25), -self.deep_depth + CLIFF_BALL, self.ball_z];
        SceneSpec::new(rng_seed, arrow, ball, self.pose(view), SceneKind::CliffView)
    }
}

/// Three egocentric views over a two-level checkerboard platform; the arrow sits on the
/// shallow side and the ball on the deep side.
pub fn gen_cliff_views(cfg: &CliffConfig, rng_seed: u64) -> Result<Vec<(Image, DepthAnswer)>> {
    let mut rng = seed::rng_for(rng_seed, &[seed::tag("cliff")]);
    let dark = muted(&mut rng, 0.08, 0.2);
    let light_c = muted(&mut rng, 0.8, 0.95);
    let (p, shallow, deep) = (cfg.checker, cfg.shallow_plane(), cfg.deep_plane());
    let tex = move |x: f64, z: f64| if ((x / p).floor() + (z / p).floor()).rem_euclid(2.0) < 1.0 { light_c } else { dark };
    (0..3)
        .map(|view| {
            let spec = cfg.spec(view, rng_seed)?;
            let mut f = Frame::new(spec.camera.camera(cfg.resolution * SSAA));
            sky(&mut f, &mut rng);
            f.draw_plane(&shallow, 2, 1.0, &tex);
            f.draw_plane(&deep, 3, 0.8, &tex);
            let light = Light { direction: raster::normalize([0.2, 1.0, -0.3]), ambient: 0.45 };
            draw_markers(&mut f, &spec, CLIFF_ARROW, CLIFF_BALL, &light);
            Ok((f.resolve(SSAA), spec.label))
        })
        .collect()
}

/// One cue-conflict sample with its sources, for inspection.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct CueSample {
    pub image: Image,
    /// Object coverage in `[0, 1]` per pixel.
    pub coverage: Vec<f64>,
    pub fill: Texture,
    pub shape: ShapeFamily,
    pub texture: TextureFamily,
}

pub(crate) fn cue_sample(shape: usize, texture: usize, resolution: usize, rng: &mut Rng) -> CueSample {
    let inst = Instance::random(ShapeFamily::ALL[shape], TextureFamily::ALL[shape], resolution, rng);
    let fill = Texture::random(TextureFamily::ALL[texture], rng);
    let az = rng.random_range(0.0..360.0);
    let f = inst.frame(az, &|_, _| [1.0; 3]);
    let side = resolution as f64;
    let tile = 4.0;
    let mut coverage = vec![0.0; resolution * resolution];
    let mut image = Image::filled(resolution, resolution, [1.0; 3]);
    let n = (SSAA * SSAA) as f64;
    for y in 0..resolution {
        for x in 0..resolution {
            let mut acc = [0.0; 3];
            let mut cov = 0.0;
            for dy in 0..SSAA {
                for dx in 0..SSAA {
                    let i = (y * SSAA + dy) * f.width() + x * SSAA + dx;
                    if f.surface[i] == OBJECT_SURFACE {
                        let (u, v) = ((x * SSAA + dx) as f64 + 0.5, (y * SSAA + dy) as f64 + 0.5);
                        let t = fill.sample(u / (side * SSAA as f64) * tile, v / (side * SSAA as f64) * tile);
                        let shade = 0.6 + 0.4 * f.color[i][0];
                        for k in 0..3 {
                            acc[k] += t[k] * shade;
                        }
                        cov += 1.0;
                    } else {
                        acc.iter_mut().for_each(|a| *a += 1.0);
                    }
                }
            }
            coverage[y * resolution + x] = cov / n;
            image.set(y, x, acc.map(|a| (a / n).clamp(0.0, 1.0) as f32));
        }
    }
    CueSample { image, coverage, fill, shape: ShapeFamily::ALL[shape], texture: TextureFamily::ALL[texture] }
}

/// Shape-class silhouettes filled with another class's texture on a white background.
/// `label` is the shape class, `texture_label` the texture class.
pub fn gen_cue_conflict(shape_classes: &[usize], texture_classes: &[usize], n: usize, resolution: usize, rng_seed: u64) -> Result<ImageDataset> {
    let pairs: Vec<(usize, usize)> = shape_classes
        .iter()
        .flat_map(|&s| texture_classes.iter().filter(move |&&t| t != s).map(move |&t| (s, t)))
        .collect();
    if pairs.is_empty() || shape_classes.iter().chain(texture_classes).any(|&c| c >= N_CLASSES) {
        return Err(Error::Argument("cue-conflict needs a valid shape/texture pair with different classes".into()));
    }
    let items = (0..n)
        .map(|i| {
            let (s, t) = pairs[i % pairs.len()];
            let mut rng = seed::rng_for(rng_seed, &[seed::tag("cue-conflict"), i as u64]);
            let sample = cue_sample(s, t, resolution, &mut rng);
            LabeledImage { id: format!("cue-{rng_seed:x}-{i:04}"), image: sample.image, label: s, texture_label: Some(t) }
        })
        .collect();
    Ok(ImageDataset { name: "cueconflict".into(), class_names: shapes::class_names(N_CLASSES), items })
}

/// Black-on-white binary silhouettes. Poses are redrawn until the area lies in 5-80%.
pub fn gen_silhouettes(shape_classes: &[usize], n: usize, resolution: usize, rng_seed: u64) -> Result<ImageDataset> {
    if shape_classes.is_empty() || shape_classes.iter().any(|&c| c >= N_CLASSES) {
        return Err(Error::Argument("silhouettes need at least one valid shape class".into()));
    }
    let items = (0..n)
        .map(|i| {
            let c = shape_classes[i % shape_classes.len()];
            let mut rng = seed::rng_for(rng_seed, &[seed::tag("silhouette"), i as u64]);
            loop {
                let mut inst = Instance::random(ShapeFamily::ALL[c], TextureFamily::ALL[c], resolution, &mut rng);
                inst.camera = inst.camera.with_size(resolution, resolution);
                let f = inst.frame(rng.random_range(0.0..360.0), &|_, _| [0.0; 3]);
                let mask = f.surface_mask(OBJECT_SURFACE);
                let area = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
                if (0.05..0.8).contains(&area) {
                    let image = Image::from_fn(resolution, resolution, |y, x| if mask[y * resolution + x] { [0.0; 3] } else { [1.0; 3] });
                    break LabeledImage { id: format!("sil-{rng_seed:x}-{i:04}"), image, label: c, texture_label: None };
                }
            }
        })
        .collect();
    Ok(ImageDataset { name: "silhouette".into(), class_names: shapes::class_names(N_CLASSES), items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::luma_plane;

    #[test]
    fn rotation_videos_shape_and_determinism() {
        let d = gen_rotation_videos(3, 2, 12, 24, 7).unwrap();
        assert_eq!(d.clips.len(), 6);
        assert!(d.clips.iter().all(|c| c.len() == 12 && (c.times[1] - c.times[0] - 30.0).abs() < 1e-9));
        let again = gen_rotation_videos(3, 2, 12, 24, 7).unwrap();
        assert!(d.clips.iter().zip(&again.clips).all(|(a, b)| a.frames == b.frames));
        // Frames of one clip change as the object turns.
        assert_ne!(d.clips[0].frames[0], d.clips[0].frames[3]);
        assert!(gen_rotation_videos(1, 2, 12, 24, 7).is_err());
    }

    /// Nearest-centroid classifier on downsampled pixels, trained on one seed and scored
    /// on another.
    #[test]
    fn rotation_classes_are_pixel_separable() {
        let (k, side) = (4, 32);
        let feat = |img: &Image| {
            let small = crate::transforms::resize(img, 8, 8);
            let mut v = luma_plane(&small);
            let m = v.iter().sum::<f32>() / v.len() as f32;
            v.iter_mut().for_each(|x| *x -= m);
            v
        };
        let train = gen_rotation_videos(k, 6, 8, side, 1).unwrap();
        let test = gen_rotation_videos(k, 4, 8, side, 2).unwrap();
        let mut cent = vec![vec![0.0f32; 64]; k];
        let mut counts = vec![0usize; k];
        for c in &train.clips {
            for f in &c.frames {
                let l = c.label.unwrap();
                cent[l].iter_mut().zip(feat(f)).for_each(|(a, b)| *a += b);
                counts[l] += 1;
            }
        }
        cent.iter_mut().zip(&counts).for_each(|(c, &n)| c.iter_mut().for_each(|x| *x /= n as f32));
        let (mut hit, mut total) = (0, 0);
        for c in &test.clips {
            for f in &c.frames {
                let x = feat(f);
                let pred = (0..k)
                    .min_by(|&a, &b| {
                        let d = |c: &Vec<f32>| c.iter().zip(&x).map(|(p, q)| (p - q).powi(2)).sum::<f32>();
                        d(&cent[a]).total_cmp(&d(&cent[b]))
                    })
                    .unwrap();
                hit += (pred == c.label.unwrap()) as usize;
                total += 1;
            }
        }
        let acc = hit as f64 / total as f64;
        assert!(acc > 1.0 / k as f64 + 0.1, "pixel probe accuracy {acc}");
    }

    fn pose() -> CameraPose {
        CameraPose { eye: [0.0, 1.4, 0.0], target: [0.0, 0.0, 3.6], fov_deg: 55.0 }
    }

    #[test]
    fn depth_scene_labels() {
        let s = SceneSpec::new(0, [0.0, 0.0, 1.0], [0.0, 0.18, 3.0], pose(), SceneKind::DepthOrder).unwrap();
        assert!(s.arrow_distance() < s.ball_distance());
        assert_eq!(s.label, DepthAnswer::Yes);
        assert_eq!(s.mirrored().unwrap().label, DepthAnswer::No);
        assert!(SceneSpec::new(0, [1.0, 0.0, 2.0], [-1.0, 0.0, 2.0], pose(), SceneKind::DepthOrder).is_err());
        let (img, label) = gen_depth_scene(&s, 32).unwrap();
        assert_eq!(label, DepthAnswer::Yes);
        assert_eq!(img, gen_depth_scene(&s, 32).unwrap().0);
    }

    #[test]
    fn random_depth_scenes_are_balanced_and_consistent() {
        let mut yes = 0;
        for i in 0..1000 {
            let s = SceneSpec::random(i);
            let (da, db) = (s.arrow_distance(), s.ball_distance());
            assert_eq!(s.label == DepthAnswer::Yes, da < db);
            assert!((da - db).abs() >= MIN_DEPTH_GAP * da.max(db));
            yes += (s.label == DepthAnswer::Yes) as usize;
        }
        assert!((yes as f64 / 1000.0 - 0.5).abs() <= 0.04, "{yes}");
    }

    #[test]
    fn depth_markers_are_visible() {
        let s = SceneSpec::random(3);
        let (img, _) = gen_depth_scene(&s, 64).unwrap();
        let count = |pred: &dyn Fn([f32; 3]) -> bool| (0..64 * 64).filter(|&i| pred(img.get(i / 64, i % 64))).count();
        assert!(count(&|p| p[1] > 0.5 && p[0] < 0.3 && p[2] < 0.3) > 0, "no green arrow pixels");
        assert!(count(&|p| p[0] > 0.5 && p[1] < 0.25 && p[2] < 0.25) > 0, "no red ball pixels");
    }

    #[test]
    fn cliff_views() {
        let cfg = CliffConfig::default();
        let v = gen_cliff_views(&cfg, 5).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|(_, l)| *l == DepthAnswer::Yes));
        let again = gen_cliff_views(&cfg, 5).unwrap();
        assert!(v.iter().zip(&again).all(|(a, b)| a.0 == b.0));
        assert_ne!(v[0].0, v[2].0);
        for view in 0..3 {
            let spec = cfg.spec(view, 5).unwrap();
            let cam = spec.camera.camera(cfg.resolution);
            for p in [spec.arrow, spec.ball] {
                let (x, y, _) = cam.project(p).unwrap();
                assert!((0.0..64.0).contains(&x) && (0.0..64.0).contains(&y), "view {view} object off screen");
            }
            // The ball must be visible over the edge, not hidden by the shallow platform.
            let dir = raster::sub(spec.ball, spec.camera.eye);
            let t = (-cfg.shallow_depth - spec.camera.eye[1]) / dir[1];
            assert!(spec.camera.eye[2] + t * dir[2] >= cfg.edge_z);
        }
    }

    /// Texture elements per pixel on each level, computed from ray-plane geometry alone.
    #[test]
    fn deep_plane_texture_is_denser() {
        let cfg = CliffConfig::default();
        for view in 0..3 {
            let cam = cfg.pose(view).camera(cfg.resolution);
            let cell = |x: usize, y: usize| -> Option<(u8, i64, i64)> {
                let d = cam.ray(x as f64 + 0.5, y as f64 + 0.5);
                for (lvl, plane) in [(0u8, cfg.shallow_plane()), (1, cfg.deep_plane())] {
                    let t = (plane.height - cam.eye[1]) / d[1];
                    let z = cam.eye[2] + t * d[2];
                    if t > 0.0 && z >= plane.z_min && z < plane.z_max {
                        let xw = cam.eye[0] + t * d[0];
                        return Some((lvl, (xw / cfg.checker).floor() as i64, (z / cfg.checker).floor() as i64));
                    }
                }
                None
            };
            let (mut edges, mut pixels) = ([0usize; 2], [0usize; 2]);
            let n = cfg.resolution;
            for y in 0..n - 1 {
                for x in 0..n - 1 {
                    let Some(c) = cell(x, y) else { continue };
                    pixels[c.0 as usize] += 1;
                    for nb in [cell(x + 1, y), cell(x, y + 1)].into_iter().flatten() {
                        if nb.0 == c.0 && (nb.1, nb.2) != (c.1, c.2) {
                            edges[c.0 as usize] += 1;
                        }
                    }
                }
            }
            let density = [edges[0] as f64 / pixels[0] as f64, edges[1] as f64 / pixels[1] as f64];
            assert!(pixels[0] > 50 && pixels[1] > 50, "{pixels:?}");
            assert!(density[1] > density[0], "view {view}: {density:?}");
        }
    }

    fn autocorr(values: &[f64], mask: &[bool], side: usize, lag: (usize, usize)) -> f64 {
        let pairs: Vec<(f64, f64)> = (0..side - lag.0)
            .flat_map(|y| (0..side - lag.1).map(move |x| (y, x)))
            .filter(|&(y, x)| mask[y * side + x] && mask[(y + lag.0) * side + x + lag.1])
            .map(|(y, x)| (values[y * side + x], values[(y + lag.0) * side + x + lag.1]))
            .collect();
        let n = pairs.len() as f64;
        let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
        let cov: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n;
        let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n;
        let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n;
        cov / (va * vb).sqrt().max(1e-12)
    }

    #[test]
    fn cue_conflict_labels_and_texture_fill() {
        let d = gen_cue_conflict(&[0, 1, 2], &[0, 1, 2], 30, 48, 3).unwrap();
        assert_eq!(d.items.len(), 30);
        assert!(d.items.iter().all(|i| Some(i.label) != i.texture_label));
        assert!(gen_cue_conflict(&[1], &[1], 3, 48, 3).is_err());

        let side = 96;
        let lags = [(0, 1), (1, 0), (0, 2), (2, 0), (0, 3), (3, 0), (2, 2), (0, 5), (5, 0)];
        let mut wins = 0;
        for i in 0..12u64 {
            let (s, t) = ((i % 3) as usize, (i % 3 + 1) as usize);
            let sample = cue_sample(s, t, side, &mut seed::rng(100 + i));
            let mask: Vec<bool> = sample.coverage.iter().map(|&c| c >= 1.0).collect();
            let luma: Vec<f64> = luma_plane(&sample.image).iter().map(|&v| v as f64).collect();
            // Full-frame renders of the fill texture and of the shape's own texture.
            let tex_src: Vec<f64> = (0..side * side)
                .map(|p| sample.fill.weight((p % side) as f64 / side as f64 * 4.0, (p / side) as f64 / side as f64 * 4.0))
                .collect();
            let own = Texture { family: TextureFamily::ALL[sample.shape as usize], ..sample.fill.clone() };
            let shape_src: Vec<f64> =
                (0..side * side).map(|p| own.weight((p % side) as f64 / side as f64 * 4.0, (p / side) as f64 / side as f64 * 4.0)).collect();
            let all = vec![true; side * side];
            let profile = |v: &[f64], m: &[bool]| lags.iter().map(|&l| autocorr(v, m, side, l)).collect::<Vec<f64>>();
            let (p, pt, ps) = (profile(&luma, &mask), profile(&tex_src, &all), profile(&shape_src, &all));
            let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            wins += (dist(&p, &pt) < dist(&p, &ps)) as usize;
            assert_eq!(sample.texture, TextureFamily::ALL[t]);
        }
        assert!(wins >= 10, "texture source matched in {wins}/12");
    }

    #[test]
    fn silhouettes_are_binary_with_bounded_area() {
        let d = gen_silhouettes(&[0, 1, 2, 3, 4, 5], 60, 48, 9).unwrap();
        for item in &d.items {
            assert!(item.image.data().iter().all(|&v| v == 0.0 || v == 1.0));
            let area = item.image.plane(0).iter().filter(|&&v| v == 0.0).count() as f64 / (48.0 * 48.0);
            assert!(area > 0.05 && area < 0.8, "{area}");
        }
        let again = gen_silhouettes(&[0, 1, 2, 3, 4, 5], 60, 48, 9).unwrap();
        assert!(d.items.iter().zip(&again.items).all(|(a, b)| a.image == b.image));
    }
}
