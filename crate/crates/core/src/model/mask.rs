use serde::{Deserialize, Serialize};

use super::MaskError;

/// Inclusive pixel bounding box. Origin is the top-left corner, x grows
/// rightward and y grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// Row-major binary segmentation mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, MaskError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(MaskError::Malformed(format!(
                "{}x{} mask needs {} bits, got {}",
                width,
                height,
                expected,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    /// Filled axis-aligned rectangle covering `bbox` (inclusive).
    pub fn rect(width: u32, height: u32, bbox: BBox) -> Self {
        Self::from_fn(width, height, |x, y| bbox.contains(x, y))
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

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Iterator over `(x, y)` of every true pixel, in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// Tight hull of the true pixels, `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        let mut hull: Option<BBox> = None;
        for (x, y) in self.pixels() {
            hull = Some(match hull {
                None => BBox::new(x, y, x, y),
                Some(b) => BBox {
                    x0: b.x0.min(x),
                    y0: b.y0.min(y),
                    x1: b.x1.max(x),
                    y1: b.y1.max(y),
                },
            });
        }
        hull
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.dims() != other.dims() {
            return Err(MaskError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Chebyshev dilation: every pixel within `radius` (in both axes) of a
    /// true pixel becomes true.
    pub fn dilate(&self, radius: u32) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let r = radius as i64;
        // horizontal pass then vertical pass (separable square element)
        let mut horiz = vec![false; self.bits.len()];
        for y in 0..h {
            for x in 0..w {
                if self.bits[(y * w + x) as usize] {
                    for nx in (x - r).max(0)..=(x + r).min(w - 1) {
                        horiz[(y * w + nx) as usize] = true;
                    }
                }
            }
        }
        let mut out = vec![false; self.bits.len()];
        for y in 0..h {
            for x in 0..w {
                if horiz[(y * w + x) as usize] {
                    for ny in (y - r).max(0)..=(y + r).min(h - 1) {
                        out[(ny * w + x) as usize] = true;
                    }
                }
            }
        }
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: out,
        }
    }

    /// Nearest-neighbour resampling to `width x height`.
    pub fn resize_nearest(&self, width: u32, height: u32) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| {
            self.get(
                nearest_source(x, self.width, width),
                nearest_source(y, self.height, height),
            )
        })
    }

    /// Sub-mask covering `bbox`.
    pub fn crop(&self, bbox: BBox) -> BinaryMask {
        BinaryMask::from_fn(bbox.width(), bbox.height(), |x, y| self.get(bbox.x0 + x, bbox.y0 + y))
    }
}

/// Source index sampled by destination index `i` when resizing an axis of
/// `src` pixels to `dst` pixels.
pub(crate) fn nearest_source(i: u32, src: u32, dst: u32) -> u32 {
    (((i as f64 + 0.5) * src as f64 / dst as f64) as u32).min(src - 1)
}
