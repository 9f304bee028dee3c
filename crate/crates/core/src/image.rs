//! RGB image in planar float layout, values in `[0, 1]`, with 8-bit PNG import/export.

use std::path::Path;

use crate::error::{Error, Result};

/// Three planes of `height * width` floats (R, G, B).
#[derive(Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image({}x{})", self.height, self.width)
    }
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        assert_eq!(data.len(), 3 * height * width, "planar RGB buffer size");
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let plane = height * width;
        let mut data = vec![0.0; 3 * plane];
        for c in 0..3 {
            data[c * plane..(c + 1) * plane].fill(rgb[c]);
        }
        Self::new(height, width, data)
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [f32; 3]) -> Self {
        let mut img = Self::filled(height, width, [0.0; 3]);
        for y in 0..height {
            for x in 0..width {
                img.set(y, x, f(y, x));
            }
        }
        img
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> [f32; 3] {
        let n = self.plane_len();
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let n = self.plane_len();
        let i = y * self.width + x;
        self.data[i] = rgb[0];
        self.data[n + i] = rgb[1];
        self.data[2 * n + i] = rgb[2];
    }

    /// Elementwise map over every sample.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image::new(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn clamp01(mut self) -> Image {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Interleaved 8-bit RGB, rounding to nearest.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let n = self.plane_len();
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            for c in 0..3 {
                out.push((self.data[c * n + i].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Self {
        assert_eq!(bytes.len(), 3 * height * width, "interleaved RGB buffer size");
        let n = height * width;
        let mut data = vec![0.0; 3 * n];
        for i in 0..n {
            for c in 0..3 {
                data[c * n + i] = bytes[3 * i + c] as f32 / 255.0;
            }
        }
        Self::new(height, width, data)
    }

    /// Rounds through 8 bits, as a save/load cycle would.
    pub fn quantized(&self) -> Image {
        Image::from_rgb8(self.height, self.width, &self.to_rgb8())
    }

    pub fn encode_png(&self) -> Vec<u8> {
        use image::ImageEncoder;
        let mut buf = Vec::new();
        image::codecs::png::PngEncoder::new(&mut buf)
            .write_image(&self.to_rgb8(), self.width as u32, self.height as u32, image::ExtendedColorType::Rgb8)
            .expect("in-memory PNG encode");
        buf
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Image, String> {
        let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?.to_rgb8();
        Ok(Image::from_rgb8(img.height() as usize, img.width() as usize, img.as_raw()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.encode_png()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Image> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Image::decode(&bytes).map_err(|msg| Error::ingest(path, format!("cannot decode image: {msg}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_after_quantization() {
        let img = Image::from_fn(5, 7, |y, x| [y as f32 / 4.0, x as f32 / 6.0, 0.3]);
        let q = img.quantized();
        let back = Image::decode(&q.encode_png()).unwrap();
        assert_eq!(back, q);
        assert!(img.data().iter().zip(q.data()).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0 + 1e-7));
    }
}
