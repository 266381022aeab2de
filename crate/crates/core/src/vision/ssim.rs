use super::{GrayImage, MetricError};

pub const SSIM_WINDOW: u32 = 8;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Summed-area table with a zero guard row and column.
struct Integral {
    stride: usize,
    data: Vec<f64>,
}

impl Integral {
    fn new(w: usize, h: usize, f: impl Fn(usize) -> f64) -> Self {
        let stride = w + 1;
        let mut data = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f(y * w + x);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row;
            }
        }
        Self { stride, data }
    }

    #[inline]
    fn window(&self, x: usize, y: usize, n: usize) -> f64 {
        let s = self.stride;
        self.data[(y + n) * s + x + n] - self.data[y * s + x + n] - self.data[(y + n) * s + x] + self.data[y * s + x]
    }
}

/// Mean SSIM over all 8x8 windows (stride 1, uniform weights, sample
/// covariance).
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    let (w, h) = (a.width() as usize, a.height() as usize);
    let n = SSIM_WINDOW as usize;
    if w < n || h < n {
        return Err(MetricError::ImageTooSmall {
            width: a.width(),
            height: a.height(),
            min: SSIM_WINDOW,
        });
    }
    let (da, db) = (a.data(), b.data());
    let sa = Integral::new(w, h, |i| da[i]);
    let sb = Integral::new(w, h, |i| db[i]);
    let saa = Integral::new(w, h, |i| da[i] * da[i]);
    let sbb = Integral::new(w, h, |i| db[i] * db[i]);
    let sab = Integral::new(w, h, |i| da[i] * db[i]);

    let count = (n * n) as f64;
    let mut total = 0.0;
    for y in 0..=h - n {
        for x in 0..=w - n {
            let (ta, tb) = (sa.window(x, y, n), sb.window(x, y, n));
            let (mu_a, mu_b) = (ta / count, tb / count);
            let var_a = (saa.window(x, y, n) - ta * mu_a) / (count - 1.0);
            let var_b = (sbb.window(x, y, n) - tb * mu_b) / (count - 1.0);
            let cov = (sab.window(x, y, n) - ta * mu_b) / (count - 1.0);
            let num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
            let den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
            total += num / den;
        }
    }
    let windows = ((w - n + 1) * (h - n + 1)) as f64;
    Ok((total / windows).clamp(-1.0, 1.0))
}
