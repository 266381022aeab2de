//! Column-major run-length codec for binary masks.
//!
//! Pixels are visited in Fortran order (down each column, then to the next
//! column). Runs alternate false/true starting with false, so a mask whose
//! first pixel is set starts with a zero-length run.

use super::{BinaryMask, MaskError};

pub fn decode_rle(counts: &[i64], width: u32, height: u32) -> Result<BinaryMask, MaskError> {
    let total = width as u64 * height as u64;
    let mut sum: u64 = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c < 0 {
            return Err(MaskError::Malformed(format!("negative run length at index {i}")));
        }
        sum = sum.saturating_add(c as u64);
    }
    if sum != total {
        return Err(MaskError::Malformed(format!(
            "run lengths sum to {sum}, expected {total} for {width}x{height}"
        )));
    }

    let h = height as usize;
    let mut mask = BinaryMask::new(width, height);
    let mut pos: usize = 0;
    let mut value = false;
    for &c in counts {
        let c = c as usize;
        if value {
            for p in pos..pos + c {
                let (x, y) = (p / h, p % h);
                mask.set(x as u32, y as u32, true);
            }
        }
        pos += c;
        value = !value;
    }
    Ok(mask)
}

/// Canonical encoding: only the leading run may be empty.
pub fn encode_rle(mask: &BinaryMask) -> Vec<i64> {
    let (w, h) = mask.dims();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run: i64 = 0;
    for x in 0..w {
        for y in 0..h {
            let bit = mask.get(x, y);
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}
