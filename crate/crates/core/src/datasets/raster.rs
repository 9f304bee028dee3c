//! Software rasterizer: pinhole camera, flat-shaded triangle meshes with a z-buffer and
//! perspective-correct texture coordinates, analytic horizontal planes, and a
//! supersampled box resolve.

use crate::image::Image;

pub type V3 = [f64; 3];

#[inline]
pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: V3) -> V3 {
    scale(a, 1.0 / norm(a))
}

pub fn distance(a: V3, b: V3) -> f64 {
    norm(sub(a, b))
}

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_vec(m: &Mat3, v: V3) -> V3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Rotation about the vertical axis.
pub fn rot_y(rad: f64) -> Mat3 {
    let (s, c) = rad.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn rot_x(rad: f64) -> Mat3 {
    let (s, c) = rad.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub fn rot_z(rad: f64) -> Mat3 {
    let (s, c) = rad.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// `p -> R (s p) + t`.
#[derive(Clone, Copy, Debug)]
pub struct Transform {
    pub rotation: Mat3,
    pub scale: f64,
    pub translation: V3,
}

impl Transform {
    pub fn new(rotation: Mat3, scale: f64, translation: V3) -> Self {
        Self { rotation, scale, translation }
    }

    pub fn apply(&self, p: V3) -> V3 {
        add(mat_vec(&self.rotation, scale(p, self.scale)), self.translation)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Vertex {
    pub pos: V3,
    pub uv: [f64; 2],
}

#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn push_vertex(&mut self, pos: V3, uv: [f64; 2]) -> usize {
        self.vertices.push(Vertex { pos, uv });
        self.vertices.len() - 1
    }

    pub fn push_quad(&mut self, a: usize, b: usize, c: usize, d: usize) {
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    pub fn append(&mut self, other: &Mesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    /// Lowest y over all vertices.
    pub fn min_y(&self) -> f64 {
        self.vertices.iter().map(|v| v.pos[1]).fold(f64::INFINITY, f64::min)
    }
}

/// Pinhole camera with +y world up. Pixel `(row, col)` has its center at `(col + 0.5, row + 0.5)`.
#[derive(Clone, Debug)]
pub struct Camera {
    pub eye: V3,
    pub forward: V3,
    pub right: V3,
    pub up: V3,
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

pub const NEAR: f64 = 0.01;

impl Camera {
    pub fn look_at(eye: V3, target: V3, fov_y_deg: f64, width: usize, height: usize) -> Self {
        let forward = normalize(sub(target, eye));
        let right = normalize(cross(forward, [0.0, 1.0, 0.0]));
        let up = cross(right, forward);
        let focal = height as f64 / 2.0 / (fov_y_deg.to_radians() / 2.0).tan();
        Self { eye, forward, right, up, focal, width, height }
    }

    /// Same pose and field of view at a different raster size.
    pub fn with_size(&self, width: usize, height: usize) -> Self {
        let mut c = self.clone();
        c.focal = self.focal * height as f64 / self.height as f64;
        c.width = width;
        c.height = height;
        c
    }

    /// `(x, y, depth)` in pixels; `None` behind the near plane.
    pub fn project(&self, p: V3) -> Option<(f64, f64, f64)> {
        let d = sub(p, self.eye);
        let z = dot(d, self.forward);
        if z < NEAR {
            return None;
        }
        let x = self.width as f64 / 2.0 + self.focal * dot(d, self.right) / z;
        let y = self.height as f64 / 2.0 - self.focal * dot(d, self.up) / z;
        Some((x, y, z))
    }

    /// Ray through pixel coordinates, scaled so its forward component is 1; a point at
    /// parameter `t` along it has view depth `t`.
    pub fn ray(&self, x: f64, y: f64) -> V3 {
        let a = (x - self.width as f64 / 2.0) / self.focal;
        let b = (self.height as f64 / 2.0 - y) / self.focal;
        add(self.forward, add(scale(self.right, a), scale(self.up, b)))
    }
}

/// Directional light with an ambient floor; faces are lit two-sided.
#[derive(Clone, Copy, Debug)]
pub struct Light {
    pub direction: V3,
    pub ambient: f64,
}

impl Light {
    pub fn shade(&self, normal: V3) -> f64 {
        self.ambient + (1.0 - self.ambient) * dot(normal, self.direction).abs()
    }
}

/// Horizontal plane `y = height`, restricted to `z` in `[z_min, z_max)`.
#[derive(Clone, Copy, Debug)]
pub struct HPlane {
    pub height: f64,
    pub z_min: f64,
    pub z_max: f64,
}

/// Color, depth, and surface-id buffers. Surface 0 is background.
pub struct Frame {
    pub camera: Camera,
    pub color: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
    pub surface: Vec<u32>,
}

impl Frame {
    pub fn new(camera: Camera) -> Self {
        let n = camera.width * camera.height;
        Self { camera, color: vec![[0.0; 3]; n], depth: vec![f64::INFINITY; n], surface: vec![0; n] }
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    /// Paints every pixel from normalized `(u, v)` in `[0,1]^2` (v down) without touching depth.
    pub fn fill_background(&mut self, f: impl Fn(f64, f64) -> [f64; 3]) {
        let (w, h) = (self.width(), self.height());
        for y in 0..h {
            for x in 0..w {
                self.color[y * w + x] = f((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
            }
        }
    }

    /// Ray-casts a horizontal plane; `texture` receives world `(x, z)`.
    pub fn draw_plane(&mut self, plane: &HPlane, surface: u32, brightness: f64, texture: &dyn Fn(f64, f64) -> [f64; 3]) {
        let (w, h) = (self.width(), self.height());
        for y in 0..h {
            for x in 0..w {
                let dir = self.camera.ray(x as f64 + 0.5, y as f64 + 0.5);
                if dir[1].abs() < 1e-12 {
                    continue;
                }
                let t = (plane.height - self.camera.eye[1]) / dir[1];
                if t <= NEAR {
                    continue;
                }
                let p = add(self.camera.eye, scale(dir, t));
                if p[2] < plane.z_min || p[2] >= plane.z_max {
                    continue;
                }
                let i = y * w + x;
                if t < self.depth[i] {
                    self.depth[i] = t;
                    self.surface[i] = surface;
                    self.color[i] = scale(texture(p[0], p[2]), brightness);
                }
            }
        }
    }

    pub fn draw_mesh(
        &mut self,
        mesh: &Mesh,
        transform: &Transform,
        surface: u32,
        light: &Light,
        material: &dyn Fn(f64, f64) -> [f64; 3],
    ) {
        let world: Vec<V3> = mesh.vertices.iter().map(|v| transform.apply(v.pos)).collect();
        let screen: Vec<Option<(f64, f64, f64)>> = world.iter().map(|&p| self.camera.project(p)).collect();
        let (w, h) = (self.width() as isize, self.height() as isize);
        for tri in &mesh.triangles {
            let (Some(a), Some(b), Some(c)) = (screen[tri[0]], screen[tri[1]], screen[tri[2]]) else {
                continue;
            };
            let n = cross(sub(world[tri[1]], world[tri[0]]), sub(world[tri[2]], world[tri[0]]));
            if norm(n) < 1e-15 {
                continue;
            }
            let shade = light.shade(normalize(n));
            let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if area.abs() < 1e-12 {
                continue;
            }
            let x0 = (a.0.min(b.0).min(c.0).floor() as isize).max(0);
            let x1 = (a.0.max(b.0).max(c.0).ceil() as isize).min(w - 1);
            let y0 = (a.1.min(b.1).min(c.1).floor() as isize).max(0);
            let y1 = (a.1.max(b.1).max(c.1).ceil() as isize).min(h - 1);
            let uv = [mesh.vertices[tri[0]].uv, mesh.vertices[tri[1]].uv, mesh.vertices[tri[2]].uv];
            let inv_z = [1.0 / a.2, 1.0 / b.2, 1.0 / c.2];
            for py in y0..=y1 {
                for px in x0..=x1 {
                    let (sx, sy) = (px as f64 + 0.5, py as f64 + 0.5);
                    let w0 = ((b.0 - sx) * (c.1 - sy) - (b.1 - sy) * (c.0 - sx)) / area;
                    let w1 = ((c.0 - sx) * (a.1 - sy) - (c.1 - sy) * (a.0 - sx)) / area;
                    let w2 = 1.0 - w0 - w1;
                    if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                        continue;
                    }
                    let p = [w0 * inv_z[0], w1 * inv_z[1], w2 * inv_z[2]];
                    let z = 1.0 / (p[0] + p[1] + p[2]);
                    let i = py as usize * w as usize + px as usize;
                    if z >= self.depth[i] {
                        continue;
                    }
                    let u = z * (p[0] * uv[0][0] + p[1] * uv[1][0] + p[2] * uv[2][0]);
                    let v = z * (p[0] * uv[0][1] + p[1] * uv[1][1] + p[2] * uv[2][1]);
                    self.depth[i] = z;
                    self.surface[i] = surface;
                    self.color[i] = scale(material(u, v), shade);
                }
            }
        }
    }

    /// Averages `factor x factor` blocks into an image.
    pub fn resolve(&self, factor: usize) -> Image {
        let (w, h) = (self.width() / factor, self.height() / factor);
        let norm = 1.0 / (factor * factor) as f64;
        Image::from_fn(h, w, |y, x| {
            let mut acc = [0.0; 3];
            for dy in 0..factor {
                for dx in 0..factor {
                    let c = self.color[(y * factor + dy) * self.width() + x * factor + dx];
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            [(acc[0] * norm).clamp(0.0, 1.0) as f32, (acc[1] * norm).clamp(0.0, 1.0) as f32, (acc[2] * norm).clamp(0.0, 1.0) as f32]
        })
    }

    pub fn surface_mask(&self, surface: u32) -> Vec<bool> {
        self.surface.iter().map(|&s| s == surface).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> Mesh {
        let mut m = Mesh::default();
        let a = m.push_vertex([-1.0, -1.0, 0.0], [0.0, 0.0]);
        let b = m.push_vertex([1.0, -1.0, 0.0], [1.0, 0.0]);
        let c = m.push_vertex([1.0, 1.0, 0.0], [1.0, 1.0]);
        let d = m.push_vertex([-1.0, 1.0, 0.0], [0.0, 1.0]);
        m.push_quad(a, b, c, d);
        m
    }

    #[test]
    fn projection_round_trips_through_ray() {
        let cam = Camera::look_at([0.3, 1.0, -2.0], [0.0, 0.0, 1.0], 50.0, 64, 48);
        let p = [0.4, -0.2, 2.5];
        let (x, y, z) = cam.project(p).unwrap();
        let back = add(cam.eye, scale(cam.ray(x, y), z));
        assert!(distance(back, p) < 1e-9);
        assert!(cam.project([0.0, 1.0, -5.0]).is_none());
    }

    #[test]
    fn nearer_surface_wins_and_size_follows_perspective() {
        let cam = Camera::look_at([0.0, 0.0, -4.0], [0.0, 0.0, 0.0], 40.0, 64, 64);
        let light = Light { direction: [0.0, 0.0, 1.0], ambient: 0.2 };
        let mut f = Frame::new(cam.clone());
        f.draw_mesh(&quad(), &Transform::new(IDENTITY3, 0.5, [0.0, 0.0, 1.0]), 1, &light, &|_, _| [1.0, 0.0, 0.0]);
        let far = f.surface_mask(1).iter().filter(|&&m| m).count();
        f.draw_mesh(&quad(), &Transform::new(IDENTITY3, 0.5, [0.0, 0.0, -1.0]), 2, &light, &|_, _| [0.0, 1.0, 0.0]);
        let near = f.surface_mask(2).iter().filter(|&&m| m).count();
        assert_eq!(f.surface_mask(1).iter().filter(|&&m| m).count(), 0);
        // Same square at depth 3 vs 5: projected area ratio (5/3)^2.
        let ratio = near as f64 / far as f64;
        assert!((ratio - (5.0f64 / 3.0).powi(2)).abs() < 0.25, "{ratio}");
    }

    #[test]
    fn texture_coordinates_are_perspective_correct() {
        // A floor quad receding in depth: the v = 0.5 line must land at the projection
        // of the world midpoint, not the screen-space midpoint.
        let cam = Camera::look_at([0.0, 1.0, -1.0], [0.0, 0.0, 2.0], 60.0, 128, 128);
        let mut m = Mesh::default();
        let a = m.push_vertex([-1.0, 0.0, 0.0], [0.0, 0.0]);
        let b = m.push_vertex([1.0, 0.0, 0.0], [1.0, 0.0]);
        let c = m.push_vertex([1.0, 0.0, 4.0], [1.0, 1.0]);
        let d = m.push_vertex([-1.0, 0.0, 4.0], [0.0, 1.0]);
        m.push_quad(a, b, c, d);
        let mut f = Frame::new(cam.clone());
        let light = Light { direction: [0.0, 1.0, 0.0], ambient: 1.0 };
        f.draw_mesh(&m, &Transform::new(IDENTITY3, 1.0, [0.0; 3]), 1, &light, &|_, v| [v, v, v]);
        let (_, ymid, _) = cam.project([0.0, 0.0, 2.0]).unwrap();
        let row = ymid.floor() as usize;
        let v = f.color[row * 128 + 64][0];
        assert!((v - 0.5).abs() < 0.03, "v at world midpoint = {v}");
    }

    #[test]
    fn plane_depth_matches_geometry() {
        let cam = Camera::look_at([0.0, 1.0, 0.0], [0.0, 0.0, 2.0], 60.0, 32, 32);
        let mut f = Frame::new(cam.clone());
        f.draw_plane(&HPlane { height: 0.0, z_min: 0.0, z_max: f64::INFINITY }, 3, 1.0, &|_, _| [1.0; 3]);
        let i = 16 * 32 + 16;
        let p = add(cam.eye, scale(cam.ray(16.5, 16.5), f.depth[i]));
        assert!(p[1].abs() < 1e-9 && f.surface[i] == 3);
        // Rows above the horizon miss the plane.
        assert_eq!(f.surface[0], 0);
    }
}
