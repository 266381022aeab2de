//! Domain types shared across the engine.

mod mask;
mod rle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluators::vocab;

pub(crate) use mask::nearest_source;
pub use mask::{BBox, BinaryMask};
pub use rle::{decode_rle, encode_rle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("malformed mask: {0}")]
    Malformed(String),
    #[error("mask dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("mask is empty")]
    EmptyMask,
}

/// The nine evaluable edit operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditType {
    ObjectAddition,
    SizeChange,
    PositionalAddition,
    PositionReplacement,
    ObjectReplacement,
    ObjectRemoval,
    SingleInstanceRemoval,
    AlterParts,
    ColorChange,
}

impl EditType {
    /// Fixed reporting order.
    pub const ALL: [EditType; 9] = [
        EditType::ObjectAddition,
        EditType::SizeChange,
        EditType::PositionalAddition,
        EditType::PositionReplacement,
        EditType::ObjectReplacement,
        EditType::ObjectRemoval,
        EditType::SingleInstanceRemoval,
        EditType::AlterParts,
        EditType::ColorChange,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EditType::ObjectAddition => "object_addition",
            EditType::SizeChange => "size_change",
            EditType::PositionalAddition => "positional_addition",
            EditType::PositionReplacement => "position_replacement",
            EditType::ObjectReplacement => "object_replacement",
            EditType::ObjectRemoval => "object_removal",
            EditType::SingleInstanceRemoval => "single_instance_removal",
            EditType::AlterParts => "alter_parts",
            EditType::ColorChange => "color_change",
        }
    }

    /// Human-readable row label used in rendered tables.
    pub fn title(&self) -> &'static str {
        match self {
            EditType::ObjectAddition => "Object Addition",
            EditType::SizeChange => "Size Change",
            EditType::PositionalAddition => "Positional Addition",
            EditType::PositionReplacement => "Position Replacement",
            EditType::ObjectReplacement => "Object Replacement",
            EditType::ObjectRemoval => "Object Removal",
            EditType::SingleInstanceRemoval => "Single Instance Removal",
            EditType::AlterParts => "Alter Parts",
            EditType::ColorChange => "Color Change",
        }
    }
}

impl fmt::Display for EditType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown edit type `{0}`")]
pub struct UnknownEditType(pub String);

impl FromStr for EditType {
    type Err = UnknownEditType;

    /// Accepts the snake_case names; hyphens are treated as underscores.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        EditType::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .ok_or_else(|| UnknownEditType(s.to_string()))
    }
}

/// One edit request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditInstruction {
    pub edit_id: String,
    pub edit_type: EditType,
    /// Class name of the most significant object in the image.
    pub category: String,
    #[serde(rename = "from", default)]
    pub from_attr: Option<String>,
    #[serde(rename = "to", default)]
    pub to_attr: Option<String>,
    #[serde(default)]
    pub prompt: String,
    pub image_id: String,
}

impl EditInstruction {
    /// Trims attributes and maps `""` / `"none"` to absent.
    pub fn normalized(mut self) -> Self {
        fn clean(v: Option<String>) -> Option<String> {
            v.map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("none"))
        }
        self.category = self.category.trim().to_string();
        self.from_attr = clean(self.from_attr);
        self.to_attr = clean(self.to_attr);
        self
    }

    pub fn from_value(&self) -> Option<&str> {
        self.from_attr.as_deref()
    }

    pub fn to_value(&self) -> Option<&str> {
        self.to_attr.as_deref()
    }
}

/// Returns every problem with `inst`, sorted. An empty list means the
/// instruction is evaluable.
pub fn validate_instruction(inst: &EditInstruction) -> Vec<String> {
    let inst = inst.clone().normalized();
    let mut violations = Vec::new();
    if inst.category.is_empty() {
        violations.push("missing category".to_string());
    }
    let needs_to = !matches!(
        inst.edit_type,
        EditType::ObjectRemoval | EditType::SingleInstanceRemoval
    );
    if needs_to && inst.to_attr.is_none() {
        violations.push("missing to".to_string());
    }
    match inst.edit_type {
        EditType::ObjectReplacement if inst.from_attr.is_none() => {
            violations.push("missing from".to_string());
        }
        EditType::PositionalAddition => {
            if let Some(to) = inst.to_value() {
                match vocab::split_positional_target(to) {
                    None => violations.push("unknown direction keyword".to_string()),
                    Some((object, _)) if object.is_empty() => violations.push("missing added object".to_string()),
                    Some(_) => {}
                }
            }
        }
        EditType::PositionReplacement => {
            match inst.from_value() {
                None => violations.push("missing from".to_string()),
                Some(f) if vocab::ImagePosition::parse(f).is_none() => {
                    violations.push("unknown position keyword".to_string())
                }
                _ => {}
            }
            if let Some(t) = inst.to_value() {
                if vocab::ImagePosition::parse(t).is_none() {
                    violations.push("unknown position keyword".to_string());
                }
            }
            if let (Some(f), Some(t)) = (
                inst.from_value().and_then(vocab::ImagePosition::parse),
                inst.to_value().and_then(vocab::ImagePosition::parse),
            ) {
                if vocab::intended_movement(f, t).is_none() {
                    violations.push("position change has no direction".to_string());
                }
            }
        }
        EditType::SizeChange => {
            if let Some(t) = inst.to_value() {
                if vocab::SizeDirection::parse(t).is_none() {
                    violations.push("unknown size keyword".to_string());
                }
            }
        }
        _ => {}
    }
    violations.sort();
    violations.dedup();
    violations
}

/// One detected object instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub confidence: f64,
    pub bbox: BBox,
    pub mask: BinaryMask,
}

impl Detection {
    /// Builds a detection whose bbox is the tight hull of `mask`.
    pub fn from_mask(label: impl Into<String>, confidence: f64, mask: BinaryMask) -> Result<Self, MaskError> {
        let bbox = mask.bbox().ok_or(MaskError::EmptyMask)?;
        Ok(Self {
            label: label.into(),
            confidence,
            bbox,
            mask,
        })
    }

    pub fn area(&self) -> u64 {
        self.mask.area()
    }
}

/// All detections for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(image_id: impl Into<String>, image_width: u32, image_height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            image_width,
            image_height,
            detections: Vec::new(),
        }
    }

    pub fn with(mut self, detection: Detection) -> Self {
        self.detections.push(detection);
        self
    }

    pub fn diagonal(&self) -> f64 {
        (self.image_width as f64).hypot(self.image_height as f64)
    }
}

/// Subject-preservation sub-scores for one edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScores {
    pub sift: f64,
    pub aligned_iou: f64,
    pub ssim: f64,
    /// Absent for colour edits.
    pub color_similarity: Option<f64>,
    /// Normalized centroid distance; lower is better.
    pub position: f64,
}

/// Result of evaluating one edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub edit_id: String,
    pub edit_type: EditType,
    pub edit_specific: f64,
    /// False when detection or segmentation could not support a verdict;
    /// such records are left out of every aggregate.
    pub evaluation_success: bool,
    pub subject: Option<SubjectScores>,
    pub background: Option<f64>,
    pub notes: Vec<String>,
}
