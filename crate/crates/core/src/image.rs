//! The planar pixel container shared by every stage of the pipeline.
//!
//! Images are stored channel-last in row-major order: the value of channel
//! `c` at row `y`, column `x` lives at `(y * width + x) * channels + c`.
//! Pixel-domain images hold values in `[0, 1]`; frequency-domain planes are
//! unbounded.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Rgb};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PlanarImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid_input(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid_input(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty image");
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds an image by evaluating `f(y, x, c)` at every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::zeros(height, width, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(y, x, c);
                }
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

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    /// Copies one channel out into a single-channel image.
    pub fn channel(&self, c: usize) -> PlanarImage {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        PlanarImage {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Interleaves single-channel planes of equal size into one image.
    pub fn stack(planes: &[PlanarImage]) -> Result<PlanarImage> {
        let first = planes
            .first()
            .ok_or_else(|| Error::invalid_input("cannot stack zero planes"))?;
        let (h, w) = (first.height, first.width);
        for p in planes {
            if p.channels != 1 || p.height != h || p.width != w {
                return Err(Error::invalid_input(format!(
                    "stack expects {h}x{w}x1 planes, got {}x{}x{}",
                    p.height, p.width, p.channels
                )));
            }
        }
        let channels = planes.len();
        let mut data = vec![0.0; h * w * channels];
        for (c, p) in planes.iter().enumerate() {
            for (i, &v) in p.data.iter().enumerate() {
                data[i * channels + c] = v;
            }
        }
        PlanarImage::new(h, w, channels, data)
    }

    pub fn require_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::invalid_input(format!(
                "expected {expected} channel(s), got {}",
                self.channels
            )));
        }
        Ok(())
    }

    pub fn is_pixel_domain(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &PlanarImage) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Converts a decoded image into a 3-channel RGB image in `[0, 1]`.
    pub fn from_dynamic(img: &DynamicImage) -> PlanarImage {
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let data = rgb.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        PlanarImage {
            height: h as usize,
            width: w as usize,
            channels: 3,
            data,
        }
    }

    /// Quantizes a 3-channel pixel-domain image to 8-bit RGB.
    pub fn to_rgb8(&self) -> Result<ImageBuffer<Rgb<u8>, Vec<u8>>> {
        self.require_channels(3)?;
        let raw = self.data.iter().map(|&v| quantize_u8(v)).collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
            .ok_or_else(|| Error::invalid_input("buffer size mismatch"))
    }

    pub fn open(path: &Path) -> Result<PlanarImage> {
        let img = image::open(path).map_err(|e| Error::Ingestion {
            origin: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8()?
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::invalid_input(format!("{}: {other}", path.display())),
            })
    }
}

pub(crate) fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_length() {
        assert!(PlanarImage::new(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(PlanarImage::new(0, 2, 3, vec![]).is_err());
    }

    #[test]
    fn channel_and_stack_are_inverse() {
        let img = PlanarImage::from_fn(3, 5, 3, |y, x, c| (y * 100 + x * 10 + c) as f64);
        let planes: Vec<_> = (0..3).map(|c| img.channel(c)).collect();
        assert_eq!(planes[1].get(2, 4, 0), 241.0);
        assert_eq!(PlanarImage::stack(&planes).unwrap(), img);
    }

    #[test]
    fn rgb8_quantization_round_trips_u8_values() {
        let img = PlanarImage::from_fn(4, 4, 3, |y, x, c| ((y * 16 + x * 4 + c) as f64) / 255.0);
        let back = PlanarImage::from_dynamic(&DynamicImage::ImageRgb8(img.to_rgb8().unwrap()));
        assert!(img.max_abs_diff(&back) < 1e-12);
    }
}
