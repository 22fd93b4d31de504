//! Raster primitives: scalar and vector images, filtering, labeling and PNG I/O.
//!
//! All pixel values are stored row-major. Scalar images hold values in `[0, 1]`;
//! 8-bit and 16-bit sources are mapped linearly onto that range.

mod components;
mod filter;
mod png_io;
mod sample;

pub use components::{connected_components, LabelImage};
pub use filter::{sobel_magnitude, sobel_magnitude_gray, SOBEL_NORMALIZER};
pub use png_io::{read_png, write_png_gray16, write_png_gray8, write_png_rgb8, DecodedImage};
pub use sample::{bilinear_sample, bilinear_sample_clamped};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image is {width}x{height}, operation needs at least {min}x{min}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("data length {len} does not match {width}x{height}")]
    LengthMismatch { width: usize, height: usize, len: usize },
    #[error("sample coordinate ({u}, {v}) outside [0, {max_u}] x [0, {max_v}]")]
    OutOfRange { u: f64, v: f64, max_u: f64, max_v: f64 },
    #[error("pixel value {0} is not a finite value in [0, 1]")]
    InvalidValue(f32),
    #[error("PNG decode failed near byte {offset}: {message}")]
    Decode { offset: usize, message: String },
    #[error("unsupported PNG layout: {0}")]
    Unsupported(String),
    #[error("PNG encode failed: {0}")]
    Encode(String),
}

/// Single-channel image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::LengthMismatch { width, height, len: data.len() });
        }
        if let Some(&bad) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(ImageError::InvalidValue(bad));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Stores `value` clamped to `[0, 1]`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn invert(&self) -> Self {
        self.map(|v| 1.0 - v)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn row_mean(&self, y: usize) -> f64 {
        let row = &self.data[y * self.width..(y + 1) * self.width];
        row.iter().map(|&v| v as f64).sum::<f64>() / self.width as f64
    }

    pub fn column_mean(&self, x: usize) -> f64 {
        (0..self.height).map(|y| self.get(x, y) as f64).sum::<f64>() / self.height as f64
    }

    /// Copies the `w`×`h` window at `(x, y)`. The window must lie inside the image.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Self {
        assert!(x + w <= self.width && y + h <= self.height, "crop window outside image");
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            data.extend_from_slice(&self.data[row * self.width + x..row * self.width + x + w]);
        }
        Self { width: w, height: h, data }
    }

    /// Writes `src` into this image with its top-left corner at `(x, y)`.
    pub fn paste(&mut self, src: &GrayImage, x: usize, y: usize) {
        for sy in 0..src.height {
            let dy = y + sy;
            if dy >= self.height {
                break;
            }
            for sx in 0..src.width {
                let dx = x + sx;
                if dx < self.width {
                    self.data[dy * self.width + dx] = src.get(sx, sy);
                }
            }
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(x, self.height - 1 - y))
    }

    /// Bilinear resampling to a new size, aligning pixel centers.
    pub fn resize(&self, width: usize, height: usize) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Self::from_fn(width, height, |x, y| {
            let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            bilinear_sample_clamped(self, u, v) as f32
        })
    }
}

/// Three-channel image; used for normal maps (components in `[-1, 1]`) and RGB data.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorImage {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl VectorImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![[0.0; 3]; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::LengthMismatch { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f32; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> [f32; 3] {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: [f32; 3]) {
        self.data[y * self.width + x] = value;
    }

    /// Luminance conversion for RGB content in `[0, 1]`.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            let [r, g, b] = self.get(x, y);
            0.299 * r + 0.587 * g + 0.114 * b
        })
    }

    /// Maps unit normals from `[-1, 1]` to `[0, 1]` per channel for display.
    pub fn normals_to_rgb(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|n| n.map(|c| ((c + 1.0) * 0.5).clamp(0.0, 1.0))).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_out_of_range() {
        assert!(matches!(GrayImage::from_vec(1, 1, vec![1.5]), Err(ImageError::InvalidValue(_))));
        assert!(matches!(GrayImage::from_vec(2, 1, vec![0.5]), Err(ImageError::LengthMismatch { .. })));
    }

    #[test]
    fn crop_and_paste_are_inverse() {
        let img = GrayImage::from_fn(8, 6, |x, y| (x * 6 + y) as f32 / 48.0);
        let c = img.crop(2, 1, 3, 4);
        assert_eq!(c.get(0, 0), img.get(2, 1));
        let mut blank = GrayImage::new(8, 6);
        blank.paste(&c, 2, 1);
        assert_eq!(blank.get(4, 4), img.get(4, 4));
        assert_eq!(blank.get(0, 0), 0.0);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = GrayImage::filled(5, 7, 0.25);
        let r = img.resize(11, 3);
        assert!(r.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
        assert_eq!(img.resize(5, 7), img);
    }
}
