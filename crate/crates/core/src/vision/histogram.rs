use crate::model::BinaryMask;

use super::{MetricError, RgbImage};

pub const BINS: usize = 256;
pub const DEFAULT_SIGMA: f64 = 5.0;

/// Per-channel 256-bin histograms (R, G, B).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelHistograms {
    pub channels: [Vec<f64>; 3],
}

impl ChannelHistograms {
    pub fn zeros() -> Self {
        Self {
            channels: [vec![0.0; BINS], vec![0.0; BINS], vec![0.0; BINS]],
        }
    }

    pub fn total(&self, channel: usize) -> f64 {
        self.channels[channel].iter().sum()
    }

    /// Gaussian smoothing along the bin axis. Each bin's mass is spread over
    /// `±ceil(3σ)` neighbouring bins with weights renormalized to the valid
    /// range, so total mass is unchanged.
    pub fn smoothed(&self, sigma: f64) -> Self {
        let radius = ((3.0 * sigma).ceil() as i64).clamp(0, BINS as i64 - 1);
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|d| (-0.5 * (d as f64 / sigma).powi(2)).exp())
            .collect();
        let mut out = Self::zeros();
        for c in 0..3 {
            for (src, &mass) in self.channels[c].iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let lo = (src as i64 - radius).max(0);
                let hi = (src as i64 + radius).min(BINS as i64 - 1);
                let k = |b: i64| kernel[(b - src as i64 + radius) as usize];
                let norm: f64 = (lo..=hi).map(k).sum();
                for b in lo..=hi {
                    out.channels[c][b as usize] += mass * k(b) / norm;
                }
            }
        }
        out
    }
}

#[inline]
fn bin_of(v: f64) -> usize {
    ((v * 255.0).round() as i64).clamp(0, 255) as usize
}

/// Unsmoothed histograms of the pixels under `m`.
pub fn raw_histograms(img: &RgbImage, m: &BinaryMask) -> Result<ChannelHistograms, MetricError> {
    if img.dims() != m.dims() {
        return Err(MetricError::DimensionMismatch {
            left: img.dims(),
            right: m.dims(),
        });
    }
    if m.is_empty() {
        return Err(MetricError::EmptyMask);
    }
    let mut h = ChannelHistograms::zeros();
    for (x, y) in m.pixels() {
        let p = img.get(x, y);
        for (ch, v) in h.channels.iter_mut().zip(p) {
            ch[bin_of(v)] += 1.0;
        }
    }
    Ok(h)
}

pub fn masked_histograms(img: &RgbImage, m: &BinaryMask, sigma: f64) -> Result<ChannelHistograms, MetricError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MetricError::InvalidInput(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(raw_histograms(img, m)?.smoothed(sigma))
}

/// Histograms of `count` pixels all equal to `rgb`, smoothed with `sigma`.
pub fn constant_color_histograms(rgb: [u8; 3], count: u64, sigma: f64) -> ChannelHistograms {
    let mut h = ChannelHistograms::zeros();
    for (ch, v) in h.channels.iter_mut().zip(rgb) {
        ch[v as usize] = count as f64;
    }
    h.smoothed(sigma)
}

/// Pearson correlation of two equal-length series. `None` when either has
/// zero variance.
fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Per-channel correlation scores.
pub fn channel_correlations(h1: &ChannelHistograms, h2: &ChannelHistograms) -> [f64; 3] {
    std::array::from_fn(|c| {
        let (a, b) = (&h1.channels[c], &h2.channels[c]);
        match pearson(a, b) {
            Some(r) => r,
            None => {
                let flat = |v: &[f64]| v.iter().all(|x| *x == v[0]);
                if flat(a) && flat(b) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    })
}

/// Mean over channels of the Pearson correlation across bins.
pub fn histogram_correlation(h1: &ChannelHistograms, h2: &ChannelHistograms) -> f64 {
    let r = channel_correlations(h1, h2);
    (r[0] + r[1] + r[2]) / 3.0
}
