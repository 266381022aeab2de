use crate::model::BinaryMask;

use super::{luma, MetricError, RgbImage};

/// Grayscale MSE between `a` and `b` over the pixels not covered by
/// `exclude`.
pub fn masked_grayscale_mse(a: &RgbImage, b: &RgbImage, exclude: &BinaryMask) -> Result<f64, MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    if exclude.dims() != a.dims() {
        return Err(MetricError::DimensionMismatch {
            left: a.dims(),
            right: exclude.dims(),
        });
    }
    let mut sum = 0.0;
    let mut n = 0u64;
    for ((pa, pb), &skip) in a.pixels().iter().zip(b.pixels()).zip(exclude.bits()) {
        if !skip {
            let d = luma(*pa) - luma(*pb);
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricError::EmptyBackground);
    }
    Ok(sum / n as f64)
}
