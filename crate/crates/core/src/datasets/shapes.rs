//! Primitive meshes and procedural surface textures. Class `i` pairs shape family `i`
//! with texture family `i`.

use std::f64::consts::TAU;

use rand::Rng as _;

use super::raster::{Mesh, V3};
use crate::seed::{self, Rng};
use crate::transforms::hsv_to_rgb;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeFamily {
    Cube,
    Sphere,
    Cylinder,
    Cone,
    Torus,
    Pyramid,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 6] = [Self::Cube, Self::Sphere, Self::Cylinder, Self::Cone, Self::Torus, Self::Pyramid];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cube => "cube",
            Self::Sphere => "sphere",
            Self::Cylinder => "cylinder",
            Self::Cone => "cone",
            Self::Torus => "torus",
            Self::Pyramid => "pyramid",
        }
    }

    pub fn mesh(self) -> Mesh {
        match self {
            Self::Cube => cube(0.6),
            Self::Sphere => sphere(0.72, 12, 24),
            Self::Cylinder => cylinder(0.48, 1.3, 24),
            Self::Cone => cone(0.62, 1.35, 24),
            Self::Torus => torus(0.55, 0.24, 24, 12),
            Self::Pyramid => pyramid(0.68, 1.25),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TextureFamily {
    Stripes,
    Dots,
    Checker,
    Noise,
    Zigzag,
    Rings,
}

impl TextureFamily {
    pub const ALL: [TextureFamily; 6] = [Self::Stripes, Self::Dots, Self::Checker, Self::Noise, Self::Zigzag, Self::Rings];

    pub fn name(self) -> &'static str {
        match self {
            Self::Stripes => "stripes",
            Self::Dots => "dots",
            Self::Checker => "checker",
            Self::Noise => "noise",
            Self::Zigzag => "zigzag",
            Self::Rings => "rings",
        }
    }
}

pub const N_CLASSES: usize = 6;

pub fn class_names(n: usize) -> Vec<String> {
    ShapeFamily::ALL[..n].iter().map(|s| s.name().to_string()).collect()
}

/// Two-color pattern in texture coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    pub family: TextureFamily,
    pub a: [f64; 3],
    pub b: [f64; 3],
    /// Pattern repeats per texture-coordinate unit.
    pub freq: f64,
    pub seed: u64,
}

impl Texture {
    /// Random instance of `family` with contrasting colors.
    pub fn random(family: TextureFamily, rng: &mut Rng) -> Self {
        let h = rng.random_range(0.0..1.0f32);
        let h2 = (h + rng.random_range(0.25..0.75f32)).fract();
        let a = hsv_to_rgb(h, rng.random_range(0.45..0.9), rng.random_range(0.75..0.95));
        let b = hsv_to_rgb(h2, rng.random_range(0.45..0.9), rng.random_range(0.15..0.4));
        Self {
            family,
            a: a.map(|v| v as f64),
            b: b.map(|v| v as f64),
            freq: rng.random_range(3.0..5.0),
            seed: rng.random(),
        }
    }

    /// Mixing weight toward color `a` at `(u, v)`.
    pub fn weight(&self, u: f64, v: f64) -> f64 {
        let f = self.freq;
        let on = |c: bool| if c { 1.0 } else { 0.0 };
        match self.family {
            TextureFamily::Stripes => on((u * f).rem_euclid(1.0) < 0.5),
            TextureFamily::Dots => {
                let (x, y) = ((u * f).rem_euclid(1.0) - 0.5, (v * f).rem_euclid(1.0) - 0.5);
                on(x * x + y * y < 0.09)
            }
            TextureFamily::Checker => on(((u * f).floor() + (v * f).floor()).rem_euclid(2.0) < 1.0),
            TextureFamily::Noise => on(value_noise(self.seed, u * f * 1.5, v * f * 1.5) > 0.5),
            TextureFamily::Zigzag => {
                let tri = ((u * f * 2.0).rem_euclid(1.0) * 2.0 - 1.0).abs();
                on((v * f + 0.5 * tri).rem_euclid(1.0) < 0.5)
            }
            TextureFamily::Rings => {
                let r = ((u - 0.5).powi(2) + (v - 0.5).powi(2)).sqrt();
                on((r * f * 2.0).rem_euclid(1.0) < 0.5)
            }
        }
    }

    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let t = self.weight(u, v);
        [0, 1, 2].map(|k| t * self.a[k] + (1.0 - t) * self.b[k])
    }
}

fn lattice(seed: u64, x: i64, y: i64) -> f64 {
    (seed::derive(seed, &[x as u64, y as u64]) >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in `[0, 1]`, unit lattice spacing.
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let top = lattice(seed, ix, iy) * (1.0 - sx) + lattice(seed, ix + 1, iy) * sx;
    let bot = lattice(seed, ix, iy + 1) * (1.0 - sx) + lattice(seed, ix + 1, iy + 1) * sx;
    top * (1.0 - sy) + bot * sy
}

pub fn cube(h: f64) -> Mesh {
    let mut m = Mesh::default();
    // Each face: outward axis and two in-plane axes.
    let faces: [(V3, V3, V3); 6] = [
        ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
        ([-1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]),
        ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
        ([0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        ([0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
    ];
    for (n, a, b) in faces {
        let corner = |su: f64, sv: f64| [0, 1, 2].map(|k| h * (n[k] + su * a[k] + sv * b[k]));
        let v0 = m.push_vertex(corner(-1.0, -1.0), [0.0, 0.0]);
        let v1 = m.push_vertex(corner(1.0, -1.0), [1.0, 0.0]);
        let v2 = m.push_vertex(corner(1.0, 1.0), [1.0, 1.0]);
        let v3 = m.push_vertex(corner(-1.0, 1.0), [0.0, 1.0]);
        m.push_quad(v0, v1, v2, v3);
    }
    m
}

/// Regular grid surface `f(u, v)` over `[0,1]^2`, texture coordinates scaled by `uv_scale`.
fn grid(rows: usize, cols: usize, uv_scale: [f64; 2], f: impl Fn(f64, f64) -> V3) -> Mesh {
    let mut m = Mesh::default();
    for i in 0..=rows {
        for j in 0..=cols {
            let (u, v) = (j as f64 / cols as f64, i as f64 / rows as f64);
            m.push_vertex(f(u, v), [u * uv_scale[0], v * uv_scale[1]]);
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let k = i * (cols + 1) + j;
            m.push_quad(k, k + 1, k + cols + 2, k + cols + 1);
        }
    }
    m
}

fn disk(radius: f64, y: f64, segments: usize) -> Mesh {
    let mut m = Mesh::default();
    let c = m.push_vertex([0.0, y, 0.0], [0.5, 0.5]);
    for j in 0..=segments {
        let a = TAU * j as f64 / segments as f64;
        m.push_vertex([radius * a.cos(), y, radius * a.sin()], [0.5 + 0.5 * a.cos(), 0.5 + 0.5 * a.sin()]);
    }
    for j in 0..segments {
        m.triangles.push([c, c + 1 + j, c + 2 + j]);
    }
    m
}

pub fn sphere(r: f64, lat: usize, lon: usize) -> Mesh {
    grid(lat, lon, [2.0, 1.0], |u, v| {
        let (th, ph) = (TAU * u, std::f64::consts::PI * v);
        [r * ph.sin() * th.cos(), r * ph.cos(), r * ph.sin() * th.sin()]
    })
}

pub fn cylinder(r: f64, height: f64, segments: usize) -> Mesh {
    let mut m = grid(1, segments, [3.0, 1.0], |u, v| {
        let a = TAU * u;
        [r * a.cos(), height * (0.5 - v), r * a.sin()]
    });
    m.append(&disk(r, height / 2.0, segments));
    m.append(&disk(r, -height / 2.0, segments));
    m
}

pub fn cone(r: f64, height: f64, segments: usize) -> Mesh {
    let mut m = grid(4, segments, [3.0, 1.0], |u, v| {
        let a = TAU * u;
        [r * v * a.cos(), height * (0.5 - v), r * v * a.sin()]
    });
    m.append(&disk(r, -height / 2.0, segments));
    m
}

pub fn torus(big: f64, small: f64, major: usize, minor: usize) -> Mesh {
    grid(minor, major, [4.0, 1.0], |u, v| {
        let (a, b) = (TAU * u, TAU * v);
        let rr = big + small * b.cos();
        [rr * a.cos(), small * b.sin(), rr * a.sin()]
    })
}

pub fn pyramid(half: f64, height: f64) -> Mesh {
    let mut m = Mesh::default();
    let y0 = -height / 3.0;
    let apex = [0.0, y0 + height, 0.0];
    let base = [[-half, y0, -half], [half, y0, -half], [half, y0, half], [-half, y0, half]];
    for k in 0..4 {
        let a = m.push_vertex(base[k], [0.0, 0.0]);
        let b = m.push_vertex(base[(k + 1) % 4], [1.0, 0.0]);
        let c = m.push_vertex(apex, [0.5, 1.0]);
        m.triangles.push([a, b, c]);
    }
    let q: Vec<usize> = base.iter().zip([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).map(|(&p, uv)| m.push_vertex(p, uv)).collect();
    m.push_quad(q[0], q[1], q[2], q[3]);
    m
}
