//! Scale-invariant feature transform and ratio-test matching.
//!
//! Parameters follow the classical defaults: the input is doubled with
//! bilinear interpolation (assumed prior blur 0.5), three scales per octave
//! with base sigma 1.6, contrast threshold 0.04 (applied as
//! `|D(x̂)| * scales >= 0.04`), edge ratio 10, a 36-bin orientation histogram
//! with secondary peaks at 80% of the maximum, and 4x4x8 descriptors clamped
//! at 0.2. Gradient angles are measured in pixel coordinates (y down).

use std::collections::HashSet;
use std::f64::consts::PI;

use crate::model::BinaryMask;

use super::{GrayImage, MetricError};

pub const SIFT_MIN_SIZE: u32 = 32;
pub const LOWE_RATIO: f64 = 0.75;
pub const DESCRIPTOR_LEN: usize = DESCR_WIDTH * DESCR_WIDTH * DESCR_BINS;

const SCALES: usize = 3;
const SIGMA0: f64 = 1.6;
const INIT_SIGMA: f64 = 0.5;
const CONTRAST_THRESHOLD: f64 = 0.04;
const EDGE_THRESHOLD: f64 = 10.0;
const BORDER: usize = 5;
const MAX_INTERP_STEPS: usize = 5;
const ORI_BINS: usize = 36;
const ORI_PEAK_RATIO: f64 = 0.8;
const ORI_SIGMA_FACTOR: f64 = 1.5;
const ORI_RADIUS_FACTOR: f64 = 3.0 * ORI_SIGMA_FACTOR;
const DESCR_WIDTH: usize = 4;
const DESCR_BINS: usize = 8;
const DESCR_SCALE_FACTOR: f64 = 3.0;
const DESCR_MAG_THRESHOLD: f32 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    /// Position in input-image pixel coordinates.
    pub x: f64,
    pub y: f64,
    /// Blur sigma of the detection scale, in input pixels.
    pub scale: f64,
    /// Dominant gradient direction in radians, `[0, 2π)`.
    pub orientation: f64,
    pub octave: usize,
    pub layer: usize,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftFeature {
    pub keypoint: Keypoint,
    /// Unit-norm, 128 entries.
    pub descriptor: Vec<f32>,
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x] as f64
    }

    fn upsample2(img: &GrayImage) -> Plane {
        let (sw, sh) = (img.width() as usize, img.height() as usize);
        let (w, h) = (sw * 2, sh * 2);
        let src = img.data();
        let mut data = Vec::with_capacity(w * h);
        for v in 0..h {
            let sy = v as f64 * 0.5;
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(sh - 1);
            let fy = sy - y0 as f64;
            for u in 0..w {
                let sx = u as f64 * 0.5;
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(sw - 1);
                let fx = sx - x0 as f64;
                let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
                let bot = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
                data.push((top * (1.0 - fy) + bot * fy) as f32);
            }
        }
        Plane { w, h, data }
    }

    fn downsample2(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.data[2 * y * self.w + 2 * x]);
            }
        }
        Plane { w, h, data }
    }

    fn blur(&self, sigma: f64) -> Plane {
        let r = ((sigma * 4.0).round() as isize).max(1);
        let mut kernel: Vec<f32> = (-r..=r)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
            .collect();
        let sum: f32 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);

        let (w, h) = (self.w, self.h);
        let mut tmp = vec![0f32; w * h];
        for y in 0..h {
            let row = &self.data[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0f32;
                for (k, kv) in kernel.iter().enumerate() {
                    acc += kv * row[reflect101(x as isize + k as isize - r, w)];
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0f32; w * h];
        for y in 0..h {
            for (k, kv) in kernel.iter().enumerate() {
                let sy = reflect101(y as isize + k as isize - r, h);
                let src = &tmp[sy * w..(sy + 1) * w];
                let dst = &mut out[y * w..(y + 1) * w];
                for x in 0..w {
                    dst[x] += kv * src[x];
                }
            }
        }
        Plane { w, h, data: out }
    }

    fn minus(&self, other: &Plane) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

fn reflect101(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

struct Pyramid {
    gauss: Vec<Vec<Plane>>,
    dog: Vec<Vec<Plane>>,
}

fn build_pyramid(img: &GrayImage) -> Pyramid {
    let up = Plane::upsample2(img);
    let diff = (SIGMA0 * SIGMA0 - 4.0 * INIT_SIGMA * INIT_SIGMA).max(0.01).sqrt();
    let base = up.blur(diff);
    let octaves = ((base.w.min(base.h) as f64).log2() - 2.0).round().max(1.0) as usize;

    let k = 2f64.powf(1.0 / SCALES as f64);
    let mut sig = [SIGMA0; SCALES + 3];
    for (i, s) in sig.iter_mut().enumerate().skip(1) {
        let prev = SIGMA0 * k.powi(i as i32 - 1);
        let total = prev * k;
        *s = (total * total - prev * prev).sqrt();
    }

    let mut gauss: Vec<Vec<Plane>> = Vec::with_capacity(octaves);
    for o in 0..octaves {
        let first = if o == 0 {
            base.clone()
        } else {
            gauss[o - 1][SCALES].downsample2()
        };
        if first.w <= 2 * BORDER || first.h <= 2 * BORDER {
            break;
        }
        let mut layers = vec![first];
        for s in sig.iter().skip(1) {
            let next = layers.last().expect("non-empty").blur(*s);
            layers.push(next);
        }
        gauss.push(layers);
    }
    let dog = gauss
        .iter()
        .map(|layers| layers.windows(2).map(|p| p[1].minus(&p[0])).collect())
        .collect();
    Pyramid { gauss, dog }
}

fn is_extremum(dog: &[Plane], layer: usize, x: usize, y: usize, threshold: f64) -> bool {
    let val = dog[layer].at(x, y);
    if val.abs() <= threshold {
        return false;
    }
    let mut is_max = val > 0.0;
    let mut is_min = val < 0.0;
    for plane in &dog[layer - 1..=layer + 1] {
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                let v = plane.at(nx, ny);
                is_max &= val >= v;
                is_min &= val <= v;
            }
        }
        if !is_max && !is_min {
            return false;
        }
    }
    true
}

fn solve3(h: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    if det.abs() < 1e-18 {
        return None;
    }
    let col = |c: usize| {
        let mut m = h;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    Some([col(0) / det, col(1) / det, col(2) / det])
}

struct Refined {
    layer: usize,
    x: usize,
    y: usize,
    offset: [f64; 3],
    contrast: f64,
}

/// Sub-pixel refinement followed by low-contrast and edge rejection.
fn refine(dog: &[Plane], mut layer: usize, mut x: usize, mut y: usize) -> Option<Refined> {
    let (w, h) = (dog[0].w, dog[0].h);
    let mut step = 0;
    loop {
        let (prev, img, next) = (&dog[layer - 1], &dog[layer], &dog[layer + 1]);
        let grad = [
            (img.at(x + 1, y) - img.at(x - 1, y)) * 0.5,
            (img.at(x, y + 1) - img.at(x, y - 1)) * 0.5,
            (next.at(x, y) - prev.at(x, y)) * 0.5,
        ];
        let v2 = img.at(x, y) * 2.0;
        let dxx = img.at(x + 1, y) + img.at(x - 1, y) - v2;
        let dyy = img.at(x, y + 1) + img.at(x, y - 1) - v2;
        let dss = next.at(x, y) + prev.at(x, y) - v2;
        let dxy = (img.at(x + 1, y + 1) - img.at(x - 1, y + 1) - img.at(x + 1, y - 1) + img.at(x - 1, y - 1)) * 0.25;
        let dxs = (next.at(x + 1, y) - next.at(x - 1, y) - prev.at(x + 1, y) + prev.at(x - 1, y)) * 0.25;
        let dys = (next.at(x, y + 1) - next.at(x, y - 1) - prev.at(x, y + 1) + prev.at(x, y - 1)) * 0.25;
        let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let sol = solve3(hess, grad)?;
        let offset = [-sol[0], -sol[1], -sol[2]];

        if offset.iter().all(|o| o.abs() < 0.5) {
            let contrast = img.at(x, y) + 0.5 * (grad[0] * offset[0] + grad[1] * offset[1] + grad[2] * offset[2]);
            if contrast.abs() * (SCALES as f64) < CONTRAST_THRESHOLD {
                return None;
            }
            let tr = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            if det <= 0.0 || tr * tr * EDGE_THRESHOLD >= (EDGE_THRESHOLD + 1.0).powi(2) * det {
                return None;
            }
            return Some(Refined {
                layer,
                x,
                y,
                offset,
                contrast,
            });
        }
        step += 1;
        if step >= MAX_INTERP_STEPS || offset.iter().any(|o| o.abs() > 1e6) {
            return None;
        }
        let nx = x as f64 + offset[0].round();
        let ny = y as f64 + offset[1].round();
        let nl = layer as f64 + offset[2].round();
        if nl < 1.0
            || nl > SCALES as f64
            || nx < BORDER as f64
            || nx >= (w - BORDER) as f64
            || ny < BORDER as f64
            || ny >= (h - BORDER) as f64
        {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        layer = nl as usize;
    }
}

#[inline]
fn gradient(img: &Plane, x: usize, y: usize) -> (f64, f64) {
    (img.at(x + 1, y) - img.at(x - 1, y), img.at(x, y + 1) - img.at(x, y - 1))
}

fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

fn orientations(img: &Plane, x: usize, y: usize, scl: f64) -> Vec<f64> {
    let radius = (ORI_RADIUS_FACTOR * scl).round() as isize;
    let sigma = ORI_SIGMA_FACTOR * scl;
    let n = ORI_BINS;
    let mut raw = vec![0.0f64; n];
    for i in -radius..=radius {
        let yy = y as isize + i;
        if yy <= 0 || yy >= img.h as isize - 1 {
            continue;
        }
        for j in -radius..=radius {
            let xx = x as isize + j;
            if xx <= 0 || xx >= img.w as isize - 1 {
                continue;
            }
            let (dx, dy) = gradient(img, xx as usize, yy as usize);
            let weight = (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
            let angle = wrap_angle(dy.atan2(dx));
            let bin = ((n as f64 * angle / (2.0 * PI)).round() as usize) % n;
            raw[bin] += weight * dx.hypot(dy);
        }
    }
    let hist: Vec<f64> = (0..n)
        .map(|i| {
            let at = |d: isize| raw[(i as isize + d).rem_euclid(n as isize) as usize];
            (at(-2) + at(2)) / 16.0 + (at(-1) + at(1)) * 4.0 / 16.0 + at(0) * 6.0 / 16.0
        })
        .collect();
    let max = hist.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for j in 0..n {
        let l = hist[(j + n - 1) % n];
        let r = hist[(j + 1) % n];
        let c = hist[j];
        if c > l && c > r && c >= ORI_PEAK_RATIO * max {
            let bin = j as f64 + 0.5 * (l - r) / (l - 2.0 * c + r);
            out.push(wrap_angle(bin * 2.0 * PI / n as f64));
        }
    }
    out
}

fn descriptor(img: &Plane, x: usize, y: usize, ori: f64, scl: f64) -> Option<Vec<f32>> {
    let d = DESCR_WIDTH;
    let n = DESCR_BINS;
    let hist_width = DESCR_SCALE_FACTOR * scl;
    let radius = (hist_width * std::f64::consts::SQRT_2 * (d as f64 + 1.0) * 0.5).round();
    let radius = radius.min((img.w as f64).hypot(img.h as f64)) as isize;
    let (cos_t, sin_t) = (ori.cos() / hist_width, ori.sin() / hist_width);
    let exp_scale = -1.0 / (d as f64 * d as f64 * 0.5);
    let stride = d + 2;
    let mut hist = vec![0.0f64; stride * stride * n];

    for i in -radius..=radius {
        for j in -radius..=radius {
            let c_rot = j as f64 * cos_t + i as f64 * sin_t;
            let r_rot = -(j as f64) * sin_t + i as f64 * cos_t;
            let rbin = r_rot + d as f64 / 2.0 - 0.5;
            let cbin = c_rot + d as f64 / 2.0 - 0.5;
            if !(rbin > -1.0 && rbin < d as f64 && cbin > -1.0 && cbin < d as f64) {
                continue;
            }
            let yy = y as isize + i;
            let xx = x as isize + j;
            if yy <= 0 || yy >= img.h as isize - 1 || xx <= 0 || xx >= img.w as isize - 1 {
                continue;
            }
            let (dx, dy) = gradient(img, xx as usize, yy as usize);
            let mag = dx.hypot(dy) * ((c_rot * c_rot + r_rot * r_rot) * exp_scale).exp();
            let obin = wrap_angle(dy.atan2(dx) - ori) * n as f64 / (2.0 * PI);

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0, o0) = ((r0 + 1.0) as usize, (c0 + 1.0) as usize, o0 as usize);
            for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
                for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                    for (dor, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let idx = ((r0 + dr) * stride + c0 + dc) * n + (o0 + dor) % n;
                        hist[idx] += mag * wr * wc * wo;
                    }
                }
            }
        }
    }

    let mut desc: Vec<f32> = Vec::with_capacity(d * d * n);
    for r in 0..d {
        for c in 0..d {
            for o in 0..n {
                desc.push(hist[((r + 1) * stride + c + 1) * n + o] as f32);
            }
        }
    }
    normalize(&mut desc)?;
    desc.iter_mut().for_each(|v| *v = v.min(DESCR_MAG_THRESHOLD));
    normalize(&mut desc)?;
    Some(desc)
}

fn normalize(v: &mut [f32]) -> Option<()> {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm <= 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x = (*x as f64 / norm) as f32);
    Some(())
}

/// Detects keypoints and computes their descriptors. Ordered by octave,
/// layer, y, x, orientation.
pub fn sift_features(img: &GrayImage) -> Result<Vec<SiftFeature>, MetricError> {
    if img.width() < SIFT_MIN_SIZE || img.height() < SIFT_MIN_SIZE {
        return Err(MetricError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: SIFT_MIN_SIZE,
        });
    }
    let pyr = build_pyramid(img);
    let threshold = 0.5 * CONTRAST_THRESHOLD / SCALES as f64;
    let mut seen: HashSet<(usize, usize, usize, usize)> = HashSet::new();
    let mut features = Vec::new();

    for (o, dog) in pyr.dog.iter().enumerate() {
        let (w, h) = (dog[0].w, dog[0].h);
        let octave_scale = 2f64.powi(o as i32);
        for layer in 1..=SCALES {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    if !is_extremum(dog, layer, x, y, threshold) {
                        continue;
                    }
                    let Some(kp) = refine(dog, layer, x, y) else {
                        continue;
                    };
                    if !seen.insert((o, kp.layer, kp.y, kp.x)) {
                        continue;
                    }
                    let scl = SIGMA0 * 2f64.powf((kp.layer as f64 + kp.offset[2]) / SCALES as f64);
                    let gimg = &pyr.gauss[o][kp.layer];
                    for ori in orientations(gimg, kp.x, kp.y, scl) {
                        let Some(descriptor) = descriptor(gimg, kp.x, kp.y, ori, scl) else {
                            continue;
                        };
                        // base image is the input doubled
                        features.push(SiftFeature {
                            keypoint: Keypoint {
                                x: (kp.x as f64 + kp.offset[0]) * octave_scale * 0.5,
                                y: (kp.y as f64 + kp.offset[1]) * octave_scale * 0.5,
                                scale: scl * octave_scale * 0.5,
                                orientation: ori,
                                octave: o,
                                layer: kp.layer,
                                response: kp.contrast.abs(),
                            },
                            descriptor,
                        });
                    }
                }
            }
        }
    }
    features.sort_by(|a, b| {
        let (ka, kb) = (&a.keypoint, &b.keypoint);
        ka.octave
            .cmp(&kb.octave)
            .then(ka.layer.cmp(&kb.layer))
            .then(ka.y.total_cmp(&kb.y))
            .then(ka.x.total_cmp(&kb.x))
            .then(ka.orientation.total_cmp(&kb.orientation))
    });
    Ok(features)
}

fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fraction of features in `a` whose nearest neighbour in `b` passes the
/// ratio test. Zero when `a` is empty or `b` has fewer than two features.
pub fn match_features(a: &[SiftFeature], b: &[SiftFeature]) -> f64 {
    if a.is_empty() || b.len() < 2 {
        return 0.0;
    }
    let good = a
        .iter()
        .filter(|fa| {
            let (mut d1, mut d2) = (f32::INFINITY, f32::INFINITY);
            for fb in b {
                let d = squared_distance(&fa.descriptor, &fb.descriptor);
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                } else if d < d2 {
                    d2 = d;
                }
            }
            d2 > 0.0 && (d1 as f64).sqrt() < LOWE_RATIO * (d2 as f64).sqrt()
        })
        .count();
    good as f64 / a.len() as f64
}

fn restrict(features: Vec<SiftFeature>, mask: Option<&BinaryMask>) -> Vec<SiftFeature> {
    let Some(m) = mask else {
        return features;
    };
    let (w, h) = m.dims();
    features
        .into_iter()
        .filter(|f| {
            let x = (f.keypoint.x.round().max(0.0) as u32).min(w - 1);
            let y = (f.keypoint.y.round().max(0.0) as u32).min(h - 1);
            m.get(x, y)
        })
        .collect()
}

/// Ratio-test match score between two images, optionally restricted to
/// keypoints inside the given masks. Images below the minimum size have no
/// features and score zero.
pub fn sift_match_score(
    a: &GrayImage,
    b: &GrayImage,
    mask_a: Option<&BinaryMask>,
    mask_b: Option<&BinaryMask>,
) -> Result<f64, MetricError> {
    for (img, m) in [(a, mask_a), (b, mask_b)] {
        if let Some(m) = m {
            if m.dims() != img.dims() {
                return Err(MetricError::DimensionMismatch {
                    left: img.dims(),
                    right: m.dims(),
                });
            }
        }
    }
    let fa = restrict(sift_features(a).unwrap_or_default(), mask_a);
    let fb = restrict(sift_features(b).unwrap_or_default(), mask_b);
    Ok(match_features(&fa, &fb))
}
