//! Detection archives, label queries and multiplicity handling.
//!
//! An archive is a directory holding `manifest.json`:
//!
//! ```json
//! {
//!   "detector": "grounded-sam",
//!   "threshold": 0.1,
//!   "records": [
//!     {"image_id": "0001", "image": "0001.png", "width": 640, "height": 480,
//!      "detections": [{"label": "dog", "confidence": 0.83,
//!                      "bbox": [10, 20, 200, 300], "rle": [1234, 56, ...]}]}
//!   ],
//!   "errors": [{"image_id": "0002", "message": "inference failed"}]
//! }
//! ```
//!
//! `rle` is the column-major run-length encoding from [`crate::model::encode_rle`].
//! Boxes in the file are advisory; the loader recomputes them from the mask.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{decode_rle, encode_rle, Detection, DetectionSet};
use crate::vision::mask_centroid;

/// Default minimum detection confidence.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.1;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("malformed mask in image `{image_id}`: {message}")]
    MalformedMask { image_id: String, message: String },
    #[error("duplicate image_id `{0}`")]
    DuplicateImage(String),
    #[error("invalid record `{image_id}`: {message}")]
    InvalidRecord { image_id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDetection {
    pub label: String,
    pub confidence: f64,
    #[serde(default)]
    pub bbox: Option<[i64; 4]>,
    pub rle: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: String,
    pub image: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub detections: Vec<ManifestDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestIssue {
    pub image_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub detector: Option<String>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub records: Vec<ManifestRecord>,
    #[serde(default)]
    pub errors: Vec<ManifestIssue>,
}

/// One image's detections plus the image path relative to the image root.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveRecord {
    pub image: String,
    pub set: DetectionSet,
}

/// Validated, read-only detection archive keyed by image id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionArchive {
    pub detector: Option<String>,
    pub threshold: Option<f64>,
    pub records: BTreeMap<String, ArchiveRecord>,
    /// Per-image failures reported by the producer.
    pub errors: Vec<ManifestIssue>,
    /// Non-fatal issues found while loading.
    pub warnings: Vec<String>,
}

impl DetectionArchive {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ArchiveRecord> {
        self.records.get(image_id)
    }

    pub fn insert(&mut self, image: impl Into<String>, set: DetectionSet) {
        self.records.insert(
            set.image_id.clone(),
            ArchiveRecord {
                image: image.into(),
                set,
            },
        );
    }

    pub fn from_manifest(manifest: Manifest) -> Result<Self, ArchiveError> {
        let mut archive = DetectionArchive {
            detector: manifest.detector,
            threshold: manifest.threshold,
            errors: manifest.errors,
            ..Default::default()
        };
        for rec in manifest.records {
            if archive.records.contains_key(&rec.image_id) {
                return Err(ArchiveError::DuplicateImage(rec.image_id));
            }
            let mut set = DetectionSet::new(rec.image_id.clone(), rec.width, rec.height);
            for (i, det) in rec.detections.into_iter().enumerate() {
                if !(det.confidence.is_finite() && (0.0..=1.0).contains(&det.confidence)) {
                    return Err(ArchiveError::InvalidRecord {
                        image_id: rec.image_id,
                        message: format!("detection {i} has confidence {} outside [0,1]", det.confidence),
                    });
                }
                let mask = decode_rle(&det.rle, rec.width, rec.height).map_err(|e| ArchiveError::MalformedMask {
                    image_id: rec.image_id.clone(),
                    message: format!("detection {i}: {e}"),
                })?;
                let Some(hull) = mask.bbox() else {
                    archive.warnings.push(format!(
                        "{}: dropped detection {i} (`{}`) with an empty mask",
                        rec.image_id, det.label
                    ));
                    continue;
                };
                if let Some(b) = det.bbox {
                    if b != hull.as_array().map(i64::from) {
                        archive.warnings.push(format!(
                            "{}: detection {i} bbox {:?} replaced by mask hull {:?}",
                            rec.image_id,
                            b,
                            hull.as_array()
                        ));
                    }
                }
                set.detections.push(Detection {
                    label: det.label,
                    confidence: det.confidence,
                    bbox: hull,
                    mask,
                });
            }
            archive
                .records
                .insert(rec.image_id, ArchiveRecord { image: rec.image, set });
        }
        Ok(archive)
    }

    pub fn to_manifest(&self) -> Manifest {
        Manifest {
            detector: self.detector.clone(),
            threshold: self.threshold,
            records: self
                .records
                .values()
                .map(|r| ManifestRecord {
                    image_id: r.set.image_id.clone(),
                    image: r.image.clone(),
                    width: r.set.image_width,
                    height: r.set.image_height,
                    detections: r
                        .set
                        .detections
                        .iter()
                        .map(|d| ManifestDetection {
                            label: d.label.clone(),
                            confidence: d.confidence,
                            bbox: Some(d.bbox.as_array().map(i64::from)),
                            rle: encode_rle(&d.mask),
                        })
                        .collect(),
                })
                .collect(),
            errors: self.errors.clone(),
        }
    }

    /// Writes `manifest.json` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<(), ArchiveError> {
        let io = |source| ArchiveError::Io {
            path: dir.to_path_buf(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        let body = serde_json::to_string_pretty(&self.to_manifest()).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), body).map_err(io)
    }
}

/// Loads and validates the archive stored in directory `path`.
pub fn load_archive(path: &Path) -> Result<DetectionArchive, ArchiveError> {
    let manifest_path = path.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|source| ArchiveError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| ArchiveError::Manifest {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    DetectionArchive::from_manifest(manifest)
}

/// Lowercases and collapses whitespace.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical detection order: confidence desc, area desc, then bbox
/// `(x0, y0)` asc. The remaining keys only make the order total.
pub fn canonical_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| b.area().cmp(&a.area()))
        .then_with(|| (a.bbox.x0, a.bbox.y0).cmp(&(b.bbox.x0, b.bbox.y0)))
        .then_with(|| (a.bbox.x1, a.bbox.y1).cmp(&(b.bbox.x1, b.bbox.y1)))
        .then_with(|| a.label.cmp(&b.label))
        .then_with(|| a.mask.bits().cmp(b.mask.bits()))
}

/// Detections of `label` with confidence at least `threshold`, in canonical order.
pub fn query<'a>(set: &'a DetectionSet, label: &str, threshold: f64) -> Vec<&'a Detection> {
    let wanted = normalize_label(label);
    let mut hits: Vec<&Detection> = set
        .detections
        .iter()
        .filter(|d| d.confidence >= threshold && normalize_label(&d.label) == wanted)
        .collect();
    hits.sort_by(|a, b| canonical_order(a, b));
    hits
}

pub fn count_instances(set: &DetectionSet, label: &str, threshold: f64) -> usize {
    query(set, label, threshold).len()
}

/// Rule for choosing among several instances of one label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplicityPolicy {
    Largest,
    /// Nearest mask centroid to a reference point in pixel coordinates.
    Closest {
        x: f64,
        y: f64,
    },
    All,
}

impl MultiplicityPolicy {
    /// `Closest` policy, or `None` when the reference lies outside the image.
    pub fn closest_within(x: f64, y: f64, width: u32, height: u32) -> Option<Self> {
        let inside = x >= -0.5 && y >= -0.5 && x <= width as f64 - 0.5 && y <= height as f64 - 0.5;
        inside.then_some(MultiplicityPolicy::Closest { x, y })
    }
}

fn largest_order(a: &Detection, b: &Detection) -> Ordering {
    b.area().cmp(&a.area()).then_with(|| canonical_order(a, b))
}

/// Applies `policy`. `Largest` and `Closest` yield at most one detection;
/// `All` returns every detection in canonical order.
pub fn select<'a>(dets: &[&'a Detection], policy: MultiplicityPolicy) -> Vec<&'a Detection> {
    match policy {
        MultiplicityPolicy::Largest => largest(dets).into_iter().collect(),
        MultiplicityPolicy::Closest { x, y } => closest(dets, x, y).into_iter().collect(),
        MultiplicityPolicy::All => {
            let mut all = dets.to_vec();
            all.sort_by(|a, b| canonical_order(a, b));
            all
        }
    }
}

/// Largest mask area; ties by confidence then bbox order.
pub fn largest<'a>(dets: &[&'a Detection]) -> Option<&'a Detection> {
    dets.iter().copied().min_by(|a, b| largest_order(a, b))
}

/// Mask centroid nearest to `(x, y)`; ties by largest area.
pub fn closest<'a>(dets: &[&'a Detection], x: f64, y: f64) -> Option<&'a Detection> {
    dets.iter()
        .copied()
        .map(|d| {
            let (cx, cy) = mask_centroid(&d.mask).expect("archive masks are non-empty");
            ((cx - x).hypot(cy - y), d)
        })
        .min_by(|(da, a), (db, b)| da.total_cmp(db).then_with(|| largest_order(a, b)))
        .map(|(_, d)| d)
}
