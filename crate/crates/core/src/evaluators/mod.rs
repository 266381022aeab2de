//! Edit-specific evaluators, one per [`EditType`].
//!
//! Each evaluator returns an [`EditScore`] in `[0, 1]`. A missing required
//! object yields [`EvalError::EvaluationFailed`], which the pipeline records
//! as an unsuccessful evaluation rather than a zero score.

pub mod vocab;

use thiserror::Error;

use crate::detection::{self, DEFAULT_CONFIDENCE_THRESHOLD};
use crate::model::{Detection, DetectionSet, EditInstruction, EditType};
use crate::vision::{self, RgbImage};

use vocab::{DirectionVector, ImagePosition, SizeDirection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluation failed: {0}")]
    EvaluationFailed(String),
    #[error("unknown color `{0}`")]
    UnknownColor(String),
    #[error("unknown direction in `{0}`")]
    UnknownDirection(String),
    #[error("invalid instruction: {}", .0.join("; "))]
    InvalidInstruction(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeParams {
    /// Minimum relative area change.
    pub delta: f64,
    /// Containment threshold.
    pub containment: f64,
}

impl Default for SizeParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            containment: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub threshold: f64,
    pub size: SizeParams,
    /// Movements shorter than this fraction of the image diagonal score 0.
    pub min_movement: f64,
    pub histogram_sigma: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            size: SizeParams::default(),
            min_movement: 0.01,
            histogram_sigma: vision::DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditScore {
    pub score: f64,
    pub notes: Vec<String>,
}

impl EditScore {
    fn new(score: f64) -> Self {
        Self {
            score,
            notes: Vec::new(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

fn failed(msg: impl Into<String>) -> EvalError {
    EvalError::EvaluationFailed(msg.into())
}

fn centroid(d: &Detection) -> (f64, f64) {
    vision::mask_centroid(&d.mask).expect("detections carry non-empty masks")
}

fn largest_of<'a>(set: &'a DetectionSet, label: &str, threshold: f64) -> Option<&'a Detection> {
    detection::largest(&detection::query(set, label, threshold))
}

fn overlap(a: &Detection, b: &Detection) -> Result<u64, EvalError> {
    vision::intersection_area(&a.mask, &b.mask).map_err(|e| failed(e.to_string()))
}

/// `max(0, (90 - α) / 90)` where α is the angle in degrees between the two
/// unit vectors.
pub fn angular_score(actual: DirectionVector, intended: DirectionVector) -> f64 {
    let dot = actual.dx * intended.dx + actual.dy * intended.dy;
    let cross = actual.dx * intended.dy - actual.dy * intended.dx;
    // atan2 keeps precision near 0 and 180 degrees, where acos does not
    let alpha = cross.abs().atan2(dot).to_degrees();
    ((90.0 - alpha) / 90.0).max(0.0)
}

/// Angular score of a pixel displacement, zero when the displacement is
/// shorter than `min_len`.
pub fn directional_score(dx: f64, dy: f64, intended: DirectionVector, min_len: f64) -> f64 {
    if dx.hypot(dy) < min_len {
        return 0.0;
    }
    match DirectionVector::from_pixel_delta(dx, dy) {
        Some(v) => angular_score(v, intended),
        None => 0.0,
    }
}

/// Which third (0, 1, 2) of an axis of `extent` pixels holds coordinate `c`.
pub fn third_index(c: f64, extent: u32) -> usize {
    (((c + 0.5) * 3.0 / extent as f64).floor().max(0.0) as usize).min(2)
}

pub fn eval_object_addition(edited: &DetectionSet, to: &str, threshold: f64) -> EditScore {
    let n = detection::count_instances(edited, to, threshold);
    let s = EditScore::new(if n >= 1 { 1.0 } else { 0.0 });
    if n > 1 {
        s.note(format!("`{to}` detected {n} times"))
    } else {
        s
    }
}

pub fn eval_size_change(
    input: &DetectionSet,
    edited: &DetectionSet,
    category: &str,
    to: SizeDirection,
    params: SizeParams,
    threshold: f64,
) -> Result<EditScore, EvalError> {
    let m0 =
        largest_of(input, category, threshold).ok_or_else(|| failed(format!("`{category}` not found in input")))?;
    let m1 =
        largest_of(edited, category, threshold).ok_or_else(|| failed(format!("`{category}` not found in edited")))?;
    let (a0, a1) = (m0.area() as f64, m1.area() as f64);
    let ratio = a1 / a0;
    let gate = match to {
        SizeDirection::Small => ratio < 1.0 - params.delta,
        SizeDirection::Big => ratio > 1.0 + params.delta,
    };
    let s = EditScore::new(0.0).note(format!("area ratio {ratio:.6}"));
    if !gate {
        return Ok(s);
    }
    let containment = overlap(m0, m1)? as f64 / a0.min(a1);
    let mut s = s.note(format!("containment {containment:.6}"));
    if containment > params.containment {
        s.score = 1.0;
    }
    Ok(s)
}

pub fn eval_positional_addition(
    input: &DetectionSet,
    edited: &DetectionSet,
    category: &str,
    to: &str,
    params: &EvalParams,
) -> Result<EditScore, EvalError> {
    let (object, intended) =
        vocab::split_positional_target(to).ok_or_else(|| EvalError::UnknownDirection(to.to_string()))?;
    let anchor = largest_of(input, category, params.threshold)
        .ok_or_else(|| failed(format!("`{category}` not found in input")))?;
    let Some(added) = largest_of(edited, &object, params.threshold) else {
        return Ok(EditScore::new(0.0).note(format!("`{object}` not found in edited")));
    };
    let (ax, ay) = centroid(anchor);
    let (bx, by) = centroid(added);
    let min_len = params.min_movement * edited.diagonal();
    Ok(EditScore::new(directional_score(bx - ax, by - ay, intended, min_len)))
}

pub fn eval_position_replacement(
    input: &DetectionSet,
    edited: &DetectionSet,
    category: &str,
    from: ImagePosition,
    to: ImagePosition,
    params: &EvalParams,
) -> Result<EditScore, EvalError> {
    let plan = vocab::intended_movement(from, to)
        .ok_or_else(|| EvalError::InvalidInstruction(vec!["position change has no direction".into()]))?;
    let before = largest_of(input, category, params.threshold)
        .ok_or_else(|| failed(format!("`{category}` not found in input")))?;
    let Some(after) = largest_of(edited, category, params.threshold) else {
        return Ok(EditScore::new(0.0).note(format!("`{category}` not found in edited")));
    };
    let (x0, y0) = centroid(before);
    let (x1, y1) = centroid(after);
    let relative = directional_score(
        x1 - x0,
        y1 - y0,
        plan.direction,
        params.min_movement * edited.diagonal(),
    );
    let third = match plan.axis {
        vocab::Axis::Horizontal => third_index(x1, edited.image_width),
        vocab::Axis::Vertical => third_index(y1, edited.image_height),
    };
    let absolute = if third == plan.target_third { 1.0 } else { 0.0 };
    let score = if relative > 0.0 {
        (relative + absolute) / 2.0
    } else {
        0.0
    };
    Ok(EditScore::new(score).note(format!("relative {relative:.6}, absolute {absolute}")))
}

pub fn eval_object_replacement(
    input: &DetectionSet,
    edited: &DetectionSet,
    from: &str,
    to: &str,
    threshold: f64,
) -> Result<EditScore, EvalError> {
    let original = largest_of(input, from, threshold).ok_or_else(|| failed(format!("`{from}` not found in input")))?;
    let (cx, cy) = centroid(original);
    let candidates = detection::query(edited, to, threshold);
    let Some(replacement) = detection::closest(&candidates, cx, cy) else {
        return Ok(EditScore::new(0.0).note(format!("`{to}` not found in edited")));
    };
    Ok(EditScore::new(if overlap(original, replacement)? > 0 {
        1.0
    } else {
        0.0
    }))
}

pub fn eval_object_removal(
    input: &DetectionSet,
    edited: &DetectionSet,
    category: &str,
    threshold: f64,
) -> Result<EditScore, EvalError> {
    let ni = detection::count_instances(input, category, threshold);
    let ne = detection::count_instances(edited, category, threshold);
    removal_ratio(ni, ne).map(|s| EditScore::new(s).note(format!("{ni} -> {ne} instances")))
}

/// `max(1 - ne/ni, 0)`.
pub fn removal_ratio(ni: usize, ne: usize) -> Result<f64, EvalError> {
    if ni == 0 {
        return Err(failed("no instances in input"));
    }
    Ok((1.0 - ne as f64 / ni as f64).max(0.0))
}

pub fn eval_single_instance_removal(
    input: &DetectionSet,
    edited: &DetectionSet,
    category: &str,
    threshold: f64,
) -> Result<EditScore, EvalError> {
    let ni = detection::count_instances(input, category, threshold);
    let ne = detection::count_instances(edited, category, threshold);
    if ni == 0 {
        return Err(failed(format!("`{category}` not found in input")));
    }
    let s = EditScore::new(if ne + 1 == ni { 1.0 } else { 0.0 }).note(format!("{ni} -> {ne} instances"));
    Ok(if ne + 1 < ni {
        s.note("more than one instance removed")
    } else {
        s
    })
}

pub fn eval_alter_parts(
    input: &DetectionSet,
    edited: &DetectionSet,
    category: &str,
    to: &str,
    threshold: f64,
) -> Result<EditScore, EvalError> {
    let instances = detection::query(input, category, threshold);
    if instances.is_empty() {
        return Err(failed(format!("`{category}` not found in input")));
    }
    let parts = detection::query(edited, to, threshold);
    if parts.is_empty() {
        return Ok(EditScore::new(0.0).note(format!("`{to}` not found in edited")));
    }
    let mut hits = 0usize;
    for inst in &instances {
        let (cx, cy) = centroid(inst);
        let nearest = detection::closest(&parts, cx, cy).expect("parts is non-empty");
        if overlap(inst, nearest)? > 0 {
            hits += 1;
        }
    }
    Ok(EditScore::new(hits as f64 / instances.len() as f64)
        .note(format!("{hits}/{} instances altered", instances.len())))
}

pub fn eval_color_change(
    edited_image: &RgbImage,
    edited: &DetectionSet,
    category: &str,
    color: &str,
    params: &EvalParams,
) -> Result<EditScore, EvalError> {
    let rgb = vocab::named_color(color).ok_or_else(|| EvalError::UnknownColor(color.to_string()))?;
    let subject = largest_of(edited, category, params.threshold)
        .ok_or_else(|| failed(format!("`{category}` not found in edited")))?;
    let observed = vision::masked_histograms(edited_image, &subject.mask, params.histogram_sigma)
        .map_err(|e| failed(e.to_string()))?;
    let target = vision::constant_color_histograms(rgb, subject.area(), params.histogram_sigma);
    let raw = vision::histogram_correlation(&observed, &target);
    Ok(EditScore::new(raw.clamp(0.0, 1.0)).note(format!("raw correlation {raw:.6}")))
}

/// Dispatches `inst` to its evaluator. `edited_image` is only read for
/// colour edits.
pub fn evaluate_edit(
    inst: &EditInstruction,
    input: &DetectionSet,
    edited: &DetectionSet,
    edited_image: &RgbImage,
    params: &EvalParams,
) -> Result<EditScore, EvalError> {
    let violations = crate::model::validate_instruction(inst);
    if !violations.is_empty() {
        return Err(EvalError::InvalidInstruction(violations));
    }
    let inst = inst.clone().normalized();
    let cat = inst.category.as_str();
    let to = inst.to_value().unwrap_or("");
    let from = inst.from_value().unwrap_or("");
    let t = params.threshold;
    match inst.edit_type {
        EditType::ObjectAddition => Ok(eval_object_addition(edited, to, t)),
        EditType::SizeChange => {
            let dir = SizeDirection::parse(to).expect("validated");
            eval_size_change(input, edited, cat, dir, params.size, t)
        }
        EditType::PositionalAddition => eval_positional_addition(input, edited, cat, to, params),
        EditType::PositionReplacement => {
            let f = ImagePosition::parse(from).expect("validated");
            let p = ImagePosition::parse(to).expect("validated");
            eval_position_replacement(input, edited, cat, f, p, params)
        }
        EditType::ObjectReplacement => eval_object_replacement(input, edited, from, to, t),
        EditType::ObjectRemoval => eval_object_removal(input, edited, cat, t),
        EditType::SingleInstanceRemoval => eval_single_instance_removal(input, edited, cat, t),
        EditType::AlterParts => eval_alter_parts(input, edited, cat, to, t),
        EditType::ColorChange => eval_color_change(edited_image, edited, cat, to, params),
    }
}

/// Labels whose masks are excluded from the background for `inst`.
pub fn relevant_labels(inst: &EditInstruction) -> Vec<String> {
    let inst = inst.clone().normalized();
    let mut labels = vec![inst.category.clone()];
    match inst.edit_type {
        EditType::ObjectAddition | EditType::AlterParts => labels.extend(inst.to_attr.clone()),
        EditType::ObjectReplacement => {
            labels.extend(inst.from_attr.clone());
            labels.extend(inst.to_attr.clone());
        }
        EditType::PositionalAddition => {
            if let Some((object, _)) = inst.to_value().and_then(vocab::split_positional_target) {
                labels.push(object);
            }
        }
        _ => {}
    }
    let mut labels: Vec<String> = labels
        .iter()
        .map(|l| detection::normalize_label(l))
        .filter(|l| !l.is_empty())
        .collect();
    labels.sort();
    labels.dedup();
    labels
}
