//! Subject and background preservation scores.

use thiserror::Error;

use crate::model::{BBox, BinaryMask, EditType, SubjectScores};
use crate::vision::{self, GrayImage, MetricError, RgbImage};

/// MSE that maps to a background score of zero.
pub const BACKGROUND_MSE_NORMALIZER: f64 = 0.25;
/// Chebyshev radius by which excluded subject masks are grown.
pub const EXCLUSION_DILATION: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreservationError {
    #[error("subject lost: {0}")]
    SubjectLost(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub struct PreservationContext<'a> {
    pub input: &'a RgbImage,
    pub edited: &'a RgbImage,
    pub subject_input: &'a BinaryMask,
    pub subject_edited: &'a BinaryMask,
    pub edit_type: EditType,
    pub histogram_sigma: f64,
}

/// Grows `b` symmetrically to at least `min` pixels per side, shifting it
/// back inside a `w x h` image where needed.
fn expand_bbox(b: BBox, min: u32, w: u32, h: u32) -> BBox {
    fn axis(lo: u32, hi: u32, min: u32, extent: u32) -> (u32, u32) {
        let len = hi - lo + 1;
        if len >= min || extent <= min {
            return if len >= min { (lo, hi) } else { (0, extent - 1) };
        }
        let grow = min - len;
        let mut start = lo.saturating_sub(grow / 2);
        if start + min > extent {
            start = extent - min;
        }
        (start, start + min - 1)
    }
    let (x0, x1) = axis(b.x0, b.x1, min, w);
    let (y0, y1) = axis(b.y0, b.y1, min, h);
    BBox::new(x0, y0, x1, y1)
}

fn structural_crops(ctx: &PreservationContext, b0: BBox, b1: BBox) -> (GrayImage, GrayImage) {
    let g0 = ctx.input.to_gray().crop(b0);
    let g1 = ctx.edited.to_gray().crop(b1);
    let w = g0.width().max(g1.width()).max(vision::SSIM_WINDOW);
    let h = g0.height().max(g1.height()).max(vision::SSIM_WINDOW);
    (g0.resize_nearest(w, h), g1.resize_nearest(w, h))
}

pub fn subject_preservation(ctx: &PreservationContext) -> Result<SubjectScores, PreservationError> {
    let b0 = ctx
        .subject_input
        .bbox()
        .ok_or_else(|| PreservationError::SubjectLost("empty subject mask in input".into()))?;
    let b1 = ctx
        .subject_edited
        .bbox()
        .ok_or_else(|| PreservationError::SubjectLost("empty subject mask in edited".into()))?;
    let (w, h) = ctx.input.dims();
    if ctx.edited.dims() != (w, h) {
        return Err(MetricError::DimensionMismatch {
            left: (w, h),
            right: ctx.edited.dims(),
        }
        .into());
    }

    let s0 = expand_bbox(b0, vision::sift::SIFT_MIN_SIZE, w, h);
    let s1 = expand_bbox(b1, vision::sift::SIFT_MIN_SIZE, w, h);
    let sift = vision::sift_match_score(
        &ctx.input.to_gray().crop(s0),
        &ctx.edited.to_gray().crop(s1),
        None,
        None,
    )?;

    let (c0, c1) = structural_crops(ctx, b0, b1);
    let ssim = vision::ssim(&c0, &c1)?;

    let aligned_iou = vision::aligned_iou(ctx.subject_input, ctx.subject_edited)?;
    let position = vision::normalized_centroid_distance(ctx.subject_input, ctx.subject_edited)?;

    let color_similarity = if ctx.edit_type == EditType::ColorChange {
        None
    } else {
        let h0 = vision::masked_histograms(ctx.input, ctx.subject_input, ctx.histogram_sigma)?;
        let h1 = vision::masked_histograms(ctx.edited, ctx.subject_edited, ctx.histogram_sigma)?;
        Some(vision::histogram_correlation(&h0, &h1))
    };

    Ok(SubjectScores {
        sift,
        aligned_iou,
        ssim,
        color_similarity,
        position,
    })
}

/// `1 - min(mse / 0.25, 1)`.
pub fn background_score(mse: f64) -> f64 {
    1.0 - (mse / BACKGROUND_MSE_NORMALIZER).min(1.0)
}

/// Background score after excluding the union of `masks` grown by
/// [`EXCLUSION_DILATION`].
pub fn background_preservation(
    input: &RgbImage,
    edited: &RgbImage,
    masks: &[&BinaryMask],
) -> Result<f64, PreservationError> {
    let (w, h) = input.dims();
    let mut exclude = BinaryMask::new(w, h);
    for m in masks {
        exclude.union_with(m).map_err(MetricError::from)?;
    }
    let exclude = exclude.dilate(EXCLUSION_DILATION);
    let mse = vision::masked_grayscale_mse(input, edited, &exclude)?;
    Ok(background_score(mse))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut s = seed | 1;
        let noise: Vec<f64> = (0..w * h)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s % 256) as f64 / 255.0
            })
            .collect();
        RgbImage::from_fn(w, h, |x, y| {
            let n = noise[(y * w + x) as usize];
            let v = 0.5 + 0.3 * ((x as f64 * 0.35).sin() * (y as f64 * 0.27).cos()) + 0.2 * (n - 0.5);
            [v, 0.8 * v, 1.0 - v]
        })
    }

    #[test]
    fn expand_keeps_inside() {
        let b = expand_bbox(BBox::new(0, 0, 3, 3), 32, 64, 64);
        assert_eq!(b, BBox::new(0, 0, 31, 31));
        let b = expand_bbox(BBox::new(60, 60, 63, 63), 32, 64, 64);
        assert_eq!(b, BBox::new(32, 32, 63, 63));
        let b = expand_bbox(BBox::new(30, 30, 33, 33), 32, 64, 64);
        assert_eq!((b.width(), b.height()), (32, 32));
        assert!(b.contains(30, 30) && b.contains(33, 33));
        assert_eq!(expand_bbox(BBox::new(2, 2, 3, 3), 32, 20, 20), BBox::new(0, 0, 19, 19));
    }

    #[test]
    fn identity_edit() {
        let img = textured(80, 64, 9);
        let m = BinaryMask::rect(80, 64, BBox::new(16, 12, 63, 51));
        let ctx = PreservationContext {
            input: &img,
            edited: &img,
            subject_input: &m,
            subject_edited: &m,
            edit_type: EditType::SizeChange,
            histogram_sigma: vision::DEFAULT_SIGMA,
        };
        let s = subject_preservation(&ctx).unwrap();
        assert!(s.sift >= 0.9, "sift {}", s.sift);
        assert_eq!(s.aligned_iou, 1.0);
        assert_eq!(s.ssim, 1.0);
        assert_eq!(s.color_similarity, Some(1.0));
        assert_eq!(s.position, 0.0);
        assert_eq!(background_preservation(&img, &img, &[&m]).unwrap(), 1.0);
    }

    #[test]
    fn color_edits_skip_color() {
        let img = textured(64, 64, 3);
        let m = BinaryMask::rect(64, 64, BBox::new(8, 8, 40, 40));
        let ctx = PreservationContext {
            input: &img,
            edited: &img,
            subject_input: &m,
            subject_edited: &m,
            edit_type: EditType::ColorChange,
            histogram_sigma: vision::DEFAULT_SIGMA,
        };
        assert_eq!(subject_preservation(&ctx).unwrap().color_similarity, None);
        let empty = BinaryMask::new(64, 64);
        let lost = PreservationContext {
            subject_edited: &empty,
            ..ctx
        };
        assert!(matches!(
            subject_preservation(&lost),
            Err(PreservationError::SubjectLost(_))
        ));
    }

    #[test]
    fn negative_background_scores_zero() {
        let gray = RgbImage::solid(20, 20, [128, 128, 128]);
        let dark = RgbImage::from_fn(20, 20, |_, _| [128.0 / 255.0 - 0.5; 3]);
        let m = BinaryMask::rect(20, 20, BBox::new(5, 5, 9, 9));
        assert_eq!(background_preservation(&gray, &dark, &[&m]).unwrap(), 0.0);
        assert_eq!(background_score(0.0625), 0.75);
        assert!(matches!(
            background_preservation(&gray, &dark, &[&BinaryMask::full(20, 20)]),
            Err(PreservationError::Metric(MetricError::EmptyBackground))
        ));
    }

    #[test]
    fn symmetric_and_dilation_monotone() {
        let a = textured(32, 32, 1);
        let inner = BinaryMask::rect(32, 32, BBox::new(10, 10, 15, 15));
        let b = a
            .paint(&inner, [255, 0, 0])
            .paint(&BinaryMask::rect(32, 32, BBox::new(0, 0, 1, 1)), [0, 0, 0]);
        let ab = background_preservation(&a, &b, &[&inner]).unwrap();
        assert_eq!(ab, background_preservation(&b, &a, &[&inner]).unwrap());
        let only_inside = a.paint(&inner, [255, 0, 0]);
        let tight = background_preservation(&a, &only_inside, &[&inner]).unwrap();
        let grown = inner.dilate(3);
        assert!(background_preservation(&a, &only_inside, &[&grown]).unwrap() >= tight);
    }
}
