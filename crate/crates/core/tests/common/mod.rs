#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pixlens::detection::{load_archive, DetectionArchive};
use pixlens::model::{BBox, BinaryMask, Detection, DetectionSet};
use pixlens::pipeline::{load_edit_dataset, DatasetSource, EditDataset};
use pixlens::vision::{GrayImage, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of random Gaussian blobs over a mid-grey base, per channel.
pub fn textured(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut r = rng(seed);
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..(w * h / 150).max(8))
        .map(|_| {
            let amp = [0; 3].map(|_| r.random_range(-0.35..0.35));
            (
                r.random_range(0.0..w as f64),
                r.random_range(0.0..h as f64),
                r.random_range(1.5..4.5),
                amp,
            )
        })
        .collect();
    RgbImage::from_fn(w, h, |x, y| {
        let mut v = [0.5; 3];
        for (bx, by, s, amp) in &blobs {
            let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
            if d2 < 16.0 * s * s {
                let g = (-d2 / (2.0 * s * s)).exp();
                for c in 0..3 {
                    v[c] += amp[c] * g;
                }
            }
        }
        v
    })
}

pub fn noise_gray(w: u32, h: u32, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    let data: Vec<f64> = (0..w * h).map(|_| r.random::<f64>()).collect();
    GrayImage::from_fn(w, h, |x, y| data[(y * w + x) as usize])
}

pub fn random_mask(w: u32, h: u32, p: f64, r: &mut ChaCha8Rng) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| r.random_bool(p))
}

pub fn disc(w: u32, h: u32, cx: f64, cy: f64, radius: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= radius * radius
    })
}

pub fn rect(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> BinaryMask {
    BinaryMask::rect(w, h, BBox::new(x0, y0, x1, y1))
}

/// `base` with pixels under `mask` taken from `src`.
pub fn composite(base: &RgbImage, mask: &BinaryMask, src: &RgbImage) -> RgbImage {
    RgbImage::from_fn(base.width(), base.height(), |x, y| {
        if mask.get(x, y) {
            src.get(x, y)
        } else {
            base.get(x, y)
        }
    })
}

pub fn save_png(path: &Path, img: &RgbImage) {
    image::RgbImage::from_raw(img.width(), img.height(), img.to_rgb8())
        .expect("buffer size")
        .save(path)
        .expect("png written");
}

/// Quantizes to 8 bits, the precision the pipeline sees after a PNG round trip.
pub fn quantized(img: &RgbImage) -> RgbImage {
    RgbImage::from_rgb8(img.width(), img.height(), &img.to_rgb8()).expect("same size")
}

pub fn det(label: &str, confidence: f64, mask: BinaryMask) -> Detection {
    Detection::from_mask(label, confidence, mask).expect("non-empty mask")
}

// Brute-force oracles: direct pixel enumeration, no shared code with the library.

pub fn brute_area(m: &BinaryMask) -> u64 {
    let mut n = 0;
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                n += 1;
            }
        }
    }
    n
}

pub fn brute_centroid(m: &BinaryMask) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1.0;
            }
        }
    }
    (n > 0.0).then(|| (sx / n, sy / n))
}

pub fn brute_intersection(a: &BinaryMask, b: &BinaryMask) -> u64 {
    let mut n = 0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if a.get(x, y) && b.get(x, y) {
                n += 1;
            }
        }
    }
    n
}

fn top_left(m: &BinaryMask) -> Option<(u32, u32)> {
    let (mut x0, mut y0) = (u32::MAX, u32::MAX);
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
            }
        }
    }
    (x0 != u32::MAX).then_some((x0, y0))
}

/// IoU after shifting both masks so their bounding boxes start at the origin.
pub fn brute_aligned_iou(a: &BinaryMask, b: &BinaryMask) -> Option<f64> {
    let (ax, ay) = top_left(a)?;
    let (bx, by) = top_left(b)?;
    let w = a.width().max(b.width());
    let h = a.height().max(b.height());
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..h {
        for x in 0..w {
            let pa = x + ax < a.width() && y + ay < a.height() && a.get(x + ax, y + ay);
            let pb = x + bx < b.width() && y + by < b.height() && b.get(x + bx, y + by);
            inter += (pa && pb) as u64;
            union += (pa || pb) as u64;
        }
    }
    Some(inter as f64 / union as f64)
}

/// Angle in degrees between the pixel displacement `(dx, dy)` and the
/// intended y-up direction `(ix, iy)`.
pub fn angle_between(dx: f64, dy: f64, ix: f64, iy: f64) -> f64 {
    let a = (-dy).atan2(dx);
    let b = iy.atan2(ix);
    let mut d = (a - b).abs().to_degrees();
    if d > 180.0 {
        d = 360.0 - d;
    }
    d
}

pub const W: u32 = 96;
pub const H: u32 = 96;

pub struct FixtureSuite {
    pub root: tempfile::TempDir,
    pub edits_path: PathBuf,
    pub images_dir: PathBuf,
    pub edited_dir: PathBuf,
    pub dataset: EditDataset,
    pub detections_input: DetectionArchive,
    pub detections_edited: DetectionArchive,
    /// Edit-specific score per edit, from the oracles above.
    pub expected: BTreeMap<String, f64>,
}

pub struct Scene {
    pub image: RgbImage,
    pub ball: BinaryMask,
    pub boxy: BinaryMask,
}

pub fn scene() -> Scene {
    let background = textured(W, H, 11);
    let ball = disc(W, H, 30.0, 48.0, 10.0);
    let boxy = rect(W, H, 60, 20, 79, 39);
    let image = composite(&background, &ball, &textured(W, H, 12));
    let image = composite(&image, &boxy, &textured(W, H, 13));
    Scene {
        image: quantized(&image),
        ball,
        boxy,
    }
}

const EDITS_JSON: &str = r#"{
  "ball": {
    "scene": [
      {"edit_id": "add_hat", "edit_type": "object_addition", "from": "none", "to": "hat",
       "prompt": "Add a hat"},
      {"edit_id": "grow_ball", "edit_type": "size_change", "to": "larger",
       "prompt": "Make the ball larger"},
      {"edit_id": "ball_to_dog", "edit_type": "object_replacement", "from": "ball", "to": "dog",
       "prompt": "Replace the ball with a dog"},
      {"edit_id": "red_ball", "edit_type": "color_change", "to": "red",
       "prompt": "Make the ball red"}
    ]
  },
  "box": {
    "scene": [
      {"edit_id": "cup_right", "edit_type": "positional_addition", "to": "cup to the right of",
       "prompt": "Add a cup to the right of the box"},
      {"edit_id": "remove_box", "edit_type": "object_removal",
       "prompt": "Remove the box"}
    ]
  }
}"#;

/// Six edits of one scene, one per core edit type, written to disk as PNG
/// images, detection archives and an EditVAL-style dataset, then loaded back.
pub fn fixture_suite() -> FixtureSuite {
    let root = tempfile::tempdir().expect("tempdir");
    let images_dir = root.path().join("images");
    let edited_dir = root.path().join("edited");
    fs::create_dir_all(&images_dir).unwrap();
    fs::create_dir_all(&edited_dir).unwrap();
    let edits_path = root.path().join("edits.json");
    fs::write(&edits_path, EDITS_JSON).unwrap();

    let Scene { image, ball, boxy } = scene();
    save_png(&images_dir.join("scene.png"), &image);
    let mut input_archive = DetectionArchive {
        detector: Some("fixture".into()),
        threshold: Some(0.1),
        ..Default::default()
    };
    input_archive.insert(
        "scene.png",
        DetectionSet::new("scene", W, H)
            .with(det("ball", 0.9, ball.clone()))
            .with(det("box", 0.8, boxy.clone())),
    );

    let mut edited_archive = DetectionArchive::default();
    let mut expected = BTreeMap::new();
    let mut add = |id: &str, img: RgbImage, dets: Vec<Detection>, score: f64| {
        save_png(&edited_dir.join(format!("{id}.png")), &img);
        let mut set = DetectionSet::new(id, W, H);
        set.detections = dets;
        edited_archive.insert(format!("{id}.png"), set);
        expected.insert(id.to_string(), score);
    };

    let hat = rect(W, H, 25, 31, 35, 37);
    let img = composite(&image, &hat, &RgbImage::solid(W, H, [40, 40, 160]));
    add(
        "add_hat",
        img,
        vec![
            det("ball", 0.9, ball.clone()),
            det("box", 0.8, boxy.clone()),
            det("hat", 0.7, hat.clone()),
        ],
        1.0,
    );

    let big = disc(W, H, 30.0, 48.0, 13.0);
    let img = composite(&image, &big, &textured(W, H, 12));
    let ratio = brute_area(&big) as f64 / brute_area(&ball) as f64;
    let containment = brute_intersection(&ball, &big) as f64 / brute_area(&ball).min(brute_area(&big)) as f64;
    let grow = if ratio > 1.1 && containment > 0.9 { 1.0 } else { 0.0 };
    add(
        "grow_ball",
        img,
        vec![det("ball", 0.9, big), det("box", 0.8, boxy.clone())],
        grow,
    );

    let cup = rect(W, H, 84, 30, 91, 41);
    let img = composite(&image, &cup, &RgbImage::solid(W, H, [200, 180, 20]));
    let (bx, by) = brute_centroid(&boxy).unwrap();
    let (cx, cy) = brute_centroid(&cup).unwrap();
    let alpha = angle_between(cx - bx, cy - by, 1.0, 0.0);
    add(
        "cup_right",
        img,
        vec![
            det("ball", 0.9, ball.clone()),
            det("box", 0.8, boxy.clone()),
            det("cup", 0.6, cup),
        ],
        ((90.0 - alpha) / 90.0).max(0.0),
    );

    let dog = disc(W, H, 31.0, 47.0, 9.0);
    let img = composite(
        &composite(&image, &ball, &textured(W, H, 11)),
        &dog,
        &textured(W, H, 14),
    );
    let hit = if brute_intersection(&ball, &dog) > 0 { 1.0 } else { 0.0 };
    add(
        "ball_to_dog",
        img,
        vec![det("dog", 0.9, dog), det("box", 0.8, boxy.clone())],
        hit,
    );

    let img = composite(&image, &boxy, &textured(W, H, 11));
    let (ni, ne) = (1.0, 0.0);
    add(
        "remove_box",
        img,
        // below the 0.1 threshold, so not counted
        vec![det("ball", 0.9, ball.clone()), det("box", 0.05, boxy.clone())],
        f64::max(1.0 - ne / ni, 0.0),
    );

    let img = image.paint(&ball, [255, 0, 0]);
    // identical smoothed histograms correlate perfectly
    add(
        "red_ball",
        img,
        vec![det("ball", 0.9, ball.clone()), det("box", 0.8, boxy.clone())],
        1.0,
    );

    let det_in = root.path().join("det_input");
    let det_ed = root.path().join("det_edited");
    input_archive.write(&det_in).unwrap();
    edited_archive.write(&det_ed).unwrap();

    FixtureSuite {
        dataset: load_edit_dataset(&edits_path, DatasetSource::Editval).unwrap(),
        detections_input: load_archive(&det_in).unwrap(),
        detections_edited: load_archive(&det_ed).unwrap(),
        root,
        edits_path,
        images_dir,
        edited_dir,
        expected,
    }
}

pub mod latents {
    use pixlens::disentangle::{build_prompt_grid, categories_of, LatentArchive, PromptGrid};
    use rand::Rng;
    use std::collections::BTreeMap;

    use super::rng;

    fn vectors<'a>(keys: impl Iterator<Item = &'a String>, dim: usize, seed: u64) -> BTreeMap<String, Vec<f32>> {
        let mut r = rng(seed);
        keys.map(|k| (k.clone(), (0..dim).map(|_| r.random_range(-4i32..=4) as f32).collect()))
            .collect()
    }

    fn attributes(grid: &PromptGrid) -> Vec<String> {
        grid.prompts
            .iter()
            .filter(|p| p.object.is_none())
            .map(|p| p.attribute.clone())
            .collect()
    }

    /// `z(a, o) = u_a + v_o` and `z(a) = u_a` with small integer entries,
    /// exact in `f32`.
    pub fn compositional(dim: usize, seed: u64) -> LatentArchive {
        let grid = build_prompt_grid();
        let attrs = attributes(&grid);
        let u = vectors(attrs.iter(), dim, seed);
        let v = vectors(grid.objects.iter(), dim, seed + 1);
        let mut archive = LatentArchive::new(dim);
        archive.editor = Some("compositional".into());
        for p in &grid.prompts {
            let ua = &u[&p.attribute];
            let z = match &p.object {
                Some(o) => ua.iter().zip(&v[o]).map(|(a, b)| a + b).collect(),
                None => ua.clone(),
            };
            archive.insert(&p.prompt, z).unwrap();
        }
        archive
    }

    /// Object identity only moves the block of coordinates owned by the
    /// attribute's category; everything else is the attribute code plus
    /// small noise.
    pub fn block_disentangled(block: usize, seed: u64) -> LatentArchive {
        let grid = build_prompt_grid();
        let dim = 4 * block;
        let attrs = attributes(&grid);
        let u = vectors(attrs.iter(), dim, seed);
        let mut r = rng(seed + 7);
        let w: BTreeMap<&String, Vec<f64>> = grid
            .objects
            .iter()
            .map(|o| (o, (0..block).map(|_| r.random_range(-3.0..3.0)).collect()))
            .collect();
        let mut archive = LatentArchive::new(dim);
        archive.editor = Some("block".into());
        for p in &grid.prompts {
            let mut z: Vec<f64> = u[&p.attribute].iter().map(|&x| x as f64).collect();
            if let Some(o) = &p.object {
                let cat = categories_of(&p.attribute)[0].index();
                for (k, wk) in w[o].iter().enumerate() {
                    z[cat * block + k] += wk;
                }
                for zi in z.iter_mut() {
                    *zi += r.random_range(-0.05..0.05);
                }
            }
            archive
                .insert(&p.prompt, z.into_iter().map(|x| x as f32).collect())
                .unwrap();
        }
        archive
    }
}
