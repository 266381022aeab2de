use crate::model::BinaryMask;

use super::MetricError;

pub fn mask_area(m: &BinaryMask) -> u64 {
    m.area()
}

/// Mean coordinate of the true pixels; pixel centers sit on integers.
pub fn mask_centroid(m: &BinaryMask) -> Result<(f64, f64), MetricError> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (x, y) in m.pixels() {
        sx += x as u64;
        sy += y as u64;
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::EmptyMask);
    }
    Ok((sx as f64 / n as f64, sy as f64 / n as f64))
}

fn same_dims(a: &BinaryMask, b: &BinaryMask) -> Result<(), MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

pub fn intersection_area(a: &BinaryMask, b: &BinaryMask) -> Result<u64, MetricError> {
    same_dims(a, b)?;
    Ok(a.bits().iter().zip(b.bits()).filter(|(p, q)| **p && **q).count() as u64)
}

/// IoU after moving each mask's bounding-box top-left corner to the origin.
/// Masks may have different image dimensions.
pub fn aligned_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MetricError> {
    let ba = a.bbox().ok_or(MetricError::EmptyMask)?;
    let bb = b.bbox().ok_or(MetricError::EmptyMask)?;
    let w = ba.width().max(bb.width());
    let h = ba.height().max(bb.height());
    let mut inter = 0u64;
    for y in 0..h {
        for x in 0..w {
            let pa = x < ba.width() && y < ba.height() && a.get(ba.x0 + x, ba.y0 + y);
            let pb = x < bb.width() && y < bb.height() && b.get(bb.x0 + x, bb.y0 + y);
            if pa && pb {
                inter += 1;
            }
        }
    }
    let union = a.area() + b.area() - inter;
    Ok(inter as f64 / union as f64)
}

/// Centroid distance divided by the image diagonal.
pub fn normalized_centroid_distance(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MetricError> {
    same_dims(a, b)?;
    let (ax, ay) = mask_centroid(a)?;
    let (bx, by) = mask_centroid(b)?;
    let diag = (a.width() as f64).hypot(a.height() as f64);
    Ok(((ax - bx).hypot(ay - by) / diag).clamp(0.0, 1.0))
}
