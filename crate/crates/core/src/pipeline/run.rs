//! Runs evaluators and preservation metrics over a dataset.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::detection::{self, DetectionArchive};
use crate::evaluators::{evaluate_edit, relevant_labels, EvalParams};
use crate::model::{BinaryMask, DetectionSet, EditInstruction, EditType, EvalOutcome};
use crate::preservation::{background_preservation, subject_preservation, PreservationContext};
use crate::vision::RgbImage;

use super::dataset::EditDataset;
use super::report::EvaluationReport;

/// Extensions tried, in order, when an archive does not name the image file.
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pnm"];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("edit `{edit_id}`: missing {what} ({path})")]
    MissingArtifact {
        edit_id: String,
        what: &'static str,
        path: PathBuf,
    },
    #[error("edit `{edit_id}`: no detections for {what} image `{image_id}`")]
    MissingDetections {
        edit_id: String,
        what: &'static str,
        image_id: String,
    },
    #[error("edit `{edit_id}`: {message}")]
    InvalidArtifact { edit_id: String, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: EvalParams,
    pub workers: usize,
    pub model: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: EvalParams::default(),
            workers: 1,
            model: None,
        }
    }
}

/// Input detections are keyed by `image_id`, edited detections by `edit_id`.
pub struct RunInputs<'a> {
    pub images_dir: &'a Path,
    pub edited_dir: &'a Path,
    pub detections_input: &'a DetectionArchive,
    pub detections_edited: &'a DetectionArchive,
}

enum Side<'a> {
    Ready { set: &'a DetectionSet, image: PathBuf },
    DetectorFailed(String),
}

struct Plan<'a> {
    inst: &'a EditInstruction,
    input: Side<'a>,
    edited: Side<'a>,
}

fn find_image(dir: &Path, named: Option<&str>, id: &str) -> Option<PathBuf> {
    if let Some(name) = named.filter(|n| !n.is_empty()) {
        let p = dir.join(name);
        return p.is_file().then_some(p);
    }
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

fn plan_side<'a>(
    edit_id: &str,
    what: &'static str,
    dir: &Path,
    archive: &'a DetectionArchive,
    key: &str,
) -> Result<Side<'a>, RunError> {
    let record = archive.get(key);
    let image = find_image(dir, record.map(|r| r.image.as_str()), key).ok_or_else(|| RunError::MissingArtifact {
        edit_id: edit_id.to_string(),
        what,
        path: dir.join(record.map_or_else(|| format!("{key}.{{png,ppm,pnm}}"), |r| r.image.clone())),
    })?;
    match record {
        Some(r) => Ok(Side::Ready { set: &r.set, image }),
        None => match archive.errors.iter().find(|e| e.image_id == key) {
            Some(issue) => Ok(Side::DetectorFailed(issue.message.clone())),
            None => Err(RunError::MissingDetections {
                edit_id: edit_id.to_string(),
                what,
                image_id: key.to_string(),
            }),
        },
    }
}

fn load_rgb(edit_id: &str, path: &Path) -> Result<RgbImage, RunError> {
    let invalid = |message: String| RunError::InvalidArtifact {
        edit_id: edit_id.to_string(),
        message,
    };
    let img = image::open(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?
        .to_rgb8();
    RgbImage::from_rgb8(img.width(), img.height(), img.as_raw()).map_err(|e| invalid(e.to_string()))
}

fn resized_set(set: &DetectionSet, w: u32, h: u32) -> DetectionSet {
    let mut out = DetectionSet::new(set.image_id.clone(), w, h);
    for d in &set.detections {
        let mask = d.mask.resize_nearest(w, h);
        if let Ok(det) = crate::model::Detection::from_mask(d.label.clone(), d.confidence, mask) {
            out.detections.push(det);
        }
    }
    out
}

fn failure(inst: &EditInstruction, notes: Vec<String>) -> EvalOutcome {
    EvalOutcome {
        edit_id: inst.edit_id.clone(),
        edit_type: inst.edit_type,
        edit_specific: 0.0,
        evaluation_success: false,
        subject: None,
        background: None,
        notes,
    }
}

/// Label of the object whose preservation is measured, if any.
fn subject_label(inst: &EditInstruction) -> Option<String> {
    let inst = inst.clone().normalized();
    match inst.edit_type {
        EditType::ObjectRemoval | EditType::SingleInstanceRemoval => None,
        EditType::ObjectReplacement
            if inst.from_value().map(detection::normalize_label)
                == Some(detection::normalize_label(&inst.category)) =>
        {
            None
        }
        _ => Some(inst.category),
    }
}

fn evaluate_planned(plan: &Plan, params: &EvalParams) -> Result<EvalOutcome, RunError> {
    let inst = plan.inst;
    let id = inst.edit_id.as_str();
    let problems = crate::model::validate_instruction(inst);
    if !problems.is_empty() {
        return Ok(failure(
            inst,
            problems
                .into_iter()
                .map(|p| format!("invalid instruction: {p}"))
                .collect(),
        ));
    }
    let (in_set, in_path, ed_set, ed_path) = match (&plan.input, &plan.edited) {
        (Side::Ready { set: a, image: pa }, Side::Ready { set: b, image: pb }) => (*a, pa, *b, pb),
        (Side::DetectorFailed(m), _) => return Ok(failure(inst, vec![format!("input detection failed: {m}")])),
        (_, Side::DetectorFailed(m)) => return Ok(failure(inst, vec![format!("edited detection failed: {m}")])),
    };

    let mut notes = Vec::new();
    let input_image = load_rgb(id, in_path)?;
    let (w, h) = input_image.dims();
    if (in_set.image_width, in_set.image_height) != (w, h) {
        return Err(RunError::InvalidArtifact {
            edit_id: id.to_string(),
            message: format!(
                "input detections are {}x{} but image is {w}x{h}",
                in_set.image_width, in_set.image_height
            ),
        });
    }
    let mut edited_image = load_rgb(id, ed_path)?;
    let ed_dims = edited_image.dims();
    if (ed_set.image_width, ed_set.image_height) != ed_dims {
        return Err(RunError::InvalidArtifact {
            edit_id: id.to_string(),
            message: format!(
                "edited detections are {}x{} but image is {}x{}",
                ed_set.image_width, ed_set.image_height, ed_dims.0, ed_dims.1
            ),
        });
    }
    let resized;
    let ed_set = if ed_dims != (w, h) {
        notes.push(format!(
            "edited image resized from {}x{} to {w}x{h}",
            ed_dims.0, ed_dims.1
        ));
        edited_image = edited_image.resize_nearest(w, h);
        resized = resized_set(ed_set, w, h);
        &resized
    } else {
        ed_set
    };

    let score = match evaluate_edit(inst, in_set, ed_set, &edited_image, params) {
        Ok(s) => s,
        Err(e) => {
            notes.push(e.to_string());
            return Ok(failure(inst, notes));
        }
    };
    notes.extend(score.notes);

    let subject = match subject_label(inst) {
        None => None,
        Some(label) => {
            let pick = |set| detection::largest(&detection::query(set, &label, params.threshold));
            match (pick(in_set), pick(ed_set)) {
                (Some(a), Some(b)) => {
                    let ctx = PreservationContext {
                        input: &input_image,
                        edited: &edited_image,
                        subject_input: &a.mask,
                        subject_edited: &b.mask,
                        edit_type: inst.edit_type,
                        histogram_sigma: params.histogram_sigma,
                    };
                    match subject_preservation(&ctx) {
                        Ok(s) => Some(s),
                        Err(e) => {
                            notes.push(format!("subject preservation: {e}"));
                            None
                        }
                    }
                }
                (a, _) => {
                    let side = if a.is_none() { "input" } else { "edited" };
                    notes.push(format!("subject `{label}` not detected in {side} image"));
                    None
                }
            }
        }
    };

    let labels = relevant_labels(inst);
    let masks: Vec<&BinaryMask> = [in_set, ed_set]
        .iter()
        .flat_map(|set| {
            labels
                .iter()
                .flat_map(move |l| detection::query(set, l, params.threshold))
        })
        .map(|d| &d.mask)
        .collect();
    let background = match background_preservation(&input_image, &edited_image, &masks) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("background preservation: {e}"));
            None
        }
    };

    Ok(EvalOutcome {
        edit_id: inst.edit_id.clone(),
        edit_type: inst.edit_type,
        edit_specific: score.score,
        evaluation_success: true,
        subject,
        background,
        notes,
    })
}

/// Evaluates every edit of `dataset`. Missing or unreadable artifacts abort
/// the run with the first offending edit in `edit_id` order; evaluator and
/// detector failures become unsuccessful records.
pub fn run_evaluation(
    dataset: &EditDataset,
    inputs: &RunInputs,
    config: &RunConfig,
) -> Result<EvaluationReport, RunError> {
    let mut edits: Vec<&EditInstruction> = dataset.edits.iter().collect();
    edits.sort_by(|a, b| a.edit_id.cmp(&b.edit_id));
    let plans = edits
        .into_iter()
        .map(|inst| {
            Ok(Plan {
                inst,
                input: plan_side(
                    &inst.edit_id,
                    "input",
                    inputs.images_dir,
                    inputs.detections_input,
                    &inst.image_id,
                )?,
                edited: plan_side(
                    &inst.edit_id,
                    "edited",
                    inputs.edited_dir,
                    inputs.detections_edited,
                    &inst.edit_id,
                )?,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<Result<EvalOutcome, RunError>> =
        pool.install(|| plans.par_iter().map(|p| evaluate_planned(p, &config.params)).collect());
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(EvaluationReport::new(config.model.clone(), records))
}
