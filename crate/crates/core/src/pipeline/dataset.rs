//! Edit dataset ingestion.
//!
//! Three layouts are accepted:
//!
//! * `editval`: `{class: {image_id: [{edit_id, edit_type, category?, from?, to?, prompt?}]}}`.
//!   A missing `category` defaults to the class name.
//! * `magicbrush-adapted`: `{"sessions": [...], "attributes": {...}}`, where
//!   each session turn is paired with an attribute entry keyed
//!   `"{img_id}_{turn}"` that supplies the structured edit fields.
//! * `custom`: a flat list of instructions, each carrying its own `image_id`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{validate_instruction, EditInstruction, EditType};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: edit `{edit_id}`: {message}")]
    Edit {
        path: PathBuf,
        edit_id: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Editval,
    MagicbrushAdapted,
    Custom,
}

impl DatasetSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetSource::Editval => "editval",
            DatasetSource::MagicbrushAdapted => "magicbrush-adapted",
            DatasetSource::Custom => "custom",
        }
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "editval" => Ok(DatasetSource::Editval),
            "magicbrush-adapted" | "magicbrush" => Ok(DatasetSource::MagicbrushAdapted),
            "custom" => Ok(DatasetSource::Custom),
            other => Err(format!("unknown dataset source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditDataset {
    pub source: DatasetSource,
    /// Sorted by `edit_id`.
    pub edits: Vec<EditInstruction>,
    /// Validation problems per `edit_id`. Edits listed here are still part
    /// of `edits` unless they could not be turned into an instruction.
    pub violations: BTreeMap<String, Vec<String>>,
}

impl EditDataset {
    pub fn empty(source: DatasetSource) -> Self {
        Self {
            source,
            edits: Vec::new(),
            violations: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn by_image(&self) -> BTreeMap<&str, Vec<&EditInstruction>> {
        let mut out: BTreeMap<&str, Vec<&EditInstruction>> = BTreeMap::new();
        for e in &self.edits {
            out.entry(e.image_id.as_str()).or_default().push(e);
        }
        out
    }

    pub fn type_counts(&self) -> BTreeMap<EditType, usize> {
        let mut out = BTreeMap::new();
        for e in &self.edits {
            *out.entry(e.edit_type).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct RawEdit {
    edit_id: String,
    edit_type: String,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    from: Option<String>,
    #[serde(default)]
    to: Option<String>,
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default)]
    image_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct MagicbrushFile {
    #[serde(default)]
    sessions: Vec<MagicbrushSession>,
    #[serde(default)]
    attributes: BTreeMap<String, MagicbrushAttributes>,
}

#[derive(Debug, Deserialize)]
struct MagicbrushSession {
    img_id: String,
    #[serde(default)]
    turns: Vec<MagicbrushTurn>,
}

#[derive(Debug, Deserialize)]
struct MagicbrushTurn {
    turn: u32,
    #[serde(default)]
    instruction: String,
    #[serde(default)]
    input_image: Option<String>,
}

#[derive(Debug, Deserialize)]
struct MagicbrushAttributes {
    edit_type: String,
    category: String,
    #[serde(default)]
    from: Option<String>,
    #[serde(default)]
    to: Option<String>,
}

struct Loader<'a> {
    path: &'a Path,
    ids: BTreeSet<String>,
    edits: Vec<EditInstruction>,
    violations: BTreeMap<String, Vec<String>>,
}

impl<'a> Loader<'a> {
    fn schema(&self, message: impl Into<String>) -> DatasetError {
        DatasetError::Schema {
            path: self.path.to_path_buf(),
            message: message.into(),
        }
    }

    fn edit_error(&self, edit_id: &str, message: impl Into<String>) -> DatasetError {
        DatasetError::Edit {
            path: self.path.to_path_buf(),
            edit_id: edit_id.to_string(),
            message: message.into(),
        }
    }

    fn push(&mut self, inst: EditInstruction) -> Result<(), DatasetError> {
        if inst.edit_id.trim().is_empty() {
            return Err(self.schema("edit with empty edit_id"));
        }
        if !self.ids.insert(inst.edit_id.clone()) {
            return Err(self.edit_error(&inst.edit_id, "duplicate edit_id"));
        }
        if inst.image_id.trim().is_empty() {
            return Err(self.edit_error(&inst.edit_id, "missing image_id"));
        }
        let problems = validate_instruction(&inst);
        if !problems.is_empty() {
            self.violations.insert(inst.edit_id.clone(), problems);
        }
        self.edits.push(inst);
        Ok(())
    }

    fn raw(&mut self, raw: RawEdit, class: Option<&str>, image_id: Option<&str>) -> Result<(), DatasetError> {
        let edit_type = raw
            .edit_type
            .parse::<EditType>()
            .map_err(|e| self.edit_error(&raw.edit_id, e.to_string()))?;
        let image_id = match (image_id, raw.image_id) {
            (Some(i), _) => i.to_string(),
            (None, Some(i)) => i,
            (None, None) => return Err(self.edit_error(&raw.edit_id, "missing image_id")),
        };
        let category = raw.category.or_else(|| class.map(str::to_string)).unwrap_or_default();
        self.push(EditInstruction {
            edit_id: raw.edit_id,
            edit_type,
            category,
            from_attr: raw.from,
            to_attr: raw.to,
            prompt: raw.prompt.unwrap_or_default(),
            image_id,
        })
    }

    fn editval(&mut self, root: Value) -> Result<(), DatasetError> {
        let classes = match root {
            Value::Object(m) => m,
            _ => return Err(self.schema("expected an object of classes")),
        };
        for (class, images) in classes {
            let images = match images {
                Value::Object(m) => m,
                _ => return Err(self.schema(format!("class `{class}`: expected an object of images"))),
            };
            for (image_id, edits) in images {
                let edits: Vec<RawEdit> = serde_json::from_value(edits)
                    .map_err(|e| self.schema(format!("class `{class}`, image `{image_id}`: {e}")))?;
                for raw in edits {
                    self.raw(raw, Some(&class), Some(&image_id))?;
                }
            }
        }
        Ok(())
    }

    fn custom(&mut self, root: Value) -> Result<(), DatasetError> {
        let edits: Vec<RawEdit> = serde_json::from_value(root).map_err(|e| self.schema(e.to_string()))?;
        for raw in edits {
            self.raw(raw, None, None)?;
        }
        Ok(())
    }

    fn magicbrush(&mut self, root: Value) -> Result<(), DatasetError> {
        let file: MagicbrushFile = serde_json::from_value(root).map_err(|e| self.schema(e.to_string()))?;
        let mut attributes = file.attributes;
        for session in &file.sessions {
            for turn in &session.turns {
                let edit_id = format!("{}_{}", session.img_id, turn.turn);
                let Some(attr) = attributes.remove(&edit_id) else {
                    self.violations
                        .insert(edit_id, vec!["no attribute entry for turn".to_string()]);
                    continue;
                };
                let edit_type = attr
                    .edit_type
                    .parse::<EditType>()
                    .map_err(|e| self.edit_error(&edit_id, e.to_string()))?;
                self.push(EditInstruction {
                    edit_id,
                    edit_type,
                    category: attr.category,
                    from_attr: attr.from,
                    to_attr: attr.to,
                    prompt: turn.instruction.clone(),
                    image_id: turn.input_image.clone().unwrap_or_else(|| session.img_id.clone()),
                })?;
            }
        }
        for orphan in attributes.into_keys() {
            self.violations
                .insert(orphan, vec!["attribute entry without a session turn".to_string()]);
        }
        Ok(())
    }
}

/// Parses `text` as a dataset of the given layout. `path` is only used in
/// error messages.
pub fn parse_edit_dataset(text: &str, source: DatasetSource, path: &Path) -> Result<EditDataset, DatasetError> {
    if text.trim().is_empty() {
        return Ok(EditDataset::empty(source));
    }
    let root: Value = serde_json::from_str(text).map_err(|e| DatasetError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut loader = Loader {
        path,
        ids: BTreeSet::new(),
        edits: Vec::new(),
        violations: BTreeMap::new(),
    };
    match source {
        DatasetSource::Editval => loader.editval(root)?,
        DatasetSource::MagicbrushAdapted => loader.magicbrush(root)?,
        DatasetSource::Custom => loader.custom(root)?,
    }
    let mut edits = loader.edits;
    edits.sort_by(|a, b| a.edit_id.cmp(&b.edit_id));
    Ok(EditDataset {
        source,
        edits,
        violations: loader.violations,
    })
}

pub fn load_edit_dataset(path: &Path, source: DatasetSource) -> Result<EditDataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_edit_dataset(&text, source, path)
}
