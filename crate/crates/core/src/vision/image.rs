use crate::model::{nearest_source, BBox, BinaryMask};

use super::MetricError;

/// Luma weights used for every grayscale conversion.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Single-channel image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

/// Three-channel image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<[f64; 3]>,
}

impl GrayImage {
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn crop(&self, bbox: BBox) -> GrayImage {
        GrayImage::from_fn(bbox.width(), bbox.height(), |x, y| self.get(bbox.x0 + x, bbox.y0 + y))
    }

    /// Nearest-neighbour resampling to `width x height`.
    pub fn resize_nearest(&self, width: u32, height: u32) -> GrayImage {
        GrayImage::from_fn(width, height, |x, y| {
            self.get(
                nearest_source(x, self.width, width),
                nearest_source(y, self.height, height),
            )
        })
    }
}

impl RgbImage {
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self { width, height, data }
    }

    /// Builds from interleaved 8-bit RGB samples.
    pub fn from_rgb8(width: u32, height: u32, samples: &[u8]) -> Result<Self, MetricError> {
        let expected = width as usize * height as usize * 3;
        if samples.len() != expected {
            return Err(MetricError::InvalidInput(format!(
                "expected {expected} samples for {width}x{height} RGB, got {}",
                samples.len()
            )));
        }
        let data = samples
            .chunks_exact(3)
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect();
        Ok(Self { width, height, data })
    }

    pub fn solid(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let px = rgb.map(|c| c as f64 / 255.0);
        Self::from_fn(width, height, |_, _| px)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| luma(p)).collect(),
        }
    }

    pub fn crop(&self, bbox: BBox) -> RgbImage {
        RgbImage::from_fn(bbox.width(), bbox.height(), |x, y| self.get(bbox.x0 + x, bbox.y0 + y))
    }

    /// Nearest-neighbour resampling to `width x height`.
    pub fn resize_nearest(&self, width: u32, height: u32) -> RgbImage {
        RgbImage::from_fn(width, height, |x, y| {
            self.get(
                nearest_source(x, self.width, width),
                nearest_source(y, self.height, height),
            )
        })
    }

    /// Copy with every pixel under `mask` replaced by `rgb`.
    pub fn paint(&self, mask: &BinaryMask, rgb: [u8; 3]) -> RgbImage {
        let px = rgb.map(|c| c as f64 / 255.0);
        RgbImage::from_fn(self.width, self.height, |x, y| {
            if mask.get(x, y) {
                px
            } else {
                self.get(x, y)
            }
        })
    }

    /// Quantized 8-bit interleaved samples.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|p| p.map(|v| (v * 255.0).round() as u8))
            .collect()
    }
}

#[inline]
pub fn luma(p: [f64; 3]) -> f64 {
    LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2]
}
