//! Pixel and mask mathematics used by the evaluators.

mod geometry;
mod histogram;
mod image;
mod mse;
pub mod sift;
mod ssim;

use thiserror::Error;

use crate::model::MaskError;

pub use geometry::{aligned_iou, intersection_area, mask_area, mask_centroid, normalized_centroid_distance};
pub use histogram::{
    channel_correlations, constant_color_histograms, histogram_correlation, masked_histograms, raw_histograms,
    ChannelHistograms, BINS, DEFAULT_SIGMA,
};
pub use image::{luma, GrayImage, RgbImage, LUMA_WEIGHTS};
pub use mse::masked_grayscale_mse;
pub use sift::{match_features, sift_features, sift_match_score, Keypoint, SiftFeature, LOWE_RATIO};
pub use ssim::{ssim, SSIM_WINDOW};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("image {width}x{height} is smaller than the minimum {min}")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("every pixel is excluded from the background")]
    EmptyBackground,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<MaskError> for MetricError {
    fn from(e: MaskError) -> Self {
        match e {
            MaskError::EmptyMask => MetricError::EmptyMask,
            MaskError::DimensionMismatch { left, right } => MetricError::DimensionMismatch { left, right },
            MaskError::Malformed(m) => MetricError::InvalidInput(m),
        }
    }
}
