//! Latent archive: a directory holding `manifest.json` and one raw
//! little-endian `f32` file per prompt.
//!
//! ```json
//! {
//!   "dim": 4,
//!   "editor": "some-editor",
//!   "seed": 0,
//!   "entries": [
//!     {"prompt": "red plate", "object": "plate", "attribute": "red",
//!      "category": "color", "path": "00000.f32"}
//!   ]
//! }
//! ```
//!
//! `object`, `attribute` and `category` are informational; entries are keyed
//! by their normalized prompt.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DisentangleError;

pub const LATENT_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentEntry {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentManifest {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub editor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub entries: Vec<LatentEntry>,
}

/// In-memory latent vectors keyed by normalized prompt.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatentArchive {
    pub dim: usize,
    pub editor: Option<String>,
    pub seed: Option<u64>,
    pub latents: BTreeMap<String, Vec<f32>>,
}

pub fn normalize_prompt(p: &str) -> String {
    p.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl LatentArchive {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }

    pub fn insert(&mut self, prompt: &str, values: Vec<f32>) -> Result<(), DisentangleError> {
        if values.len() != self.dim {
            return Err(DisentangleError::Archive(format!(
                "latent for `{prompt}` has {} values, expected {}",
                values.len(),
                self.dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DisentangleError::Archive(format!(
                "latent for `{prompt}` has non-finite values"
            )));
        }
        self.latents.insert(normalize_prompt(prompt), values);
        Ok(())
    }

    pub fn get(&self, prompt: &str) -> Option<&[f32]> {
        self.latents.get(&normalize_prompt(prompt)).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn load(dir: &Path) -> Result<Self, DisentangleError> {
        let manifest_path = dir.join(LATENT_MANIFEST);
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| DisentangleError::Archive(format!("{}: {e}", manifest_path.display())))?;
        let manifest: LatentManifest = serde_json::from_str(&text)
            .map_err(|e| DisentangleError::Archive(format!("{}: {e}", manifest_path.display())))?;
        if manifest.dim == 0 {
            return Err(DisentangleError::Archive("manifest dim must be positive".into()));
        }
        let mut archive = LatentArchive {
            dim: manifest.dim,
            editor: manifest.editor,
            seed: manifest.seed,
            latents: BTreeMap::new(),
        };
        for entry in &manifest.entries {
            let path = dir.join(&entry.path);
            let bytes = fs::read(&path).map_err(|e| DisentangleError::Archive(format!("{}: {e}", path.display())))?;
            if bytes.len() != manifest.dim * 4 {
                return Err(DisentangleError::Archive(format!(
                    "{}: {} bytes, expected {} for dim {}",
                    path.display(),
                    bytes.len(),
                    manifest.dim * 4,
                    manifest.dim
                )));
            }
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let key = normalize_prompt(&entry.prompt);
            if archive.latents.contains_key(&key) {
                return Err(DisentangleError::Archive(format!(
                    "duplicate prompt `{}`",
                    entry.prompt
                )));
            }
            archive.insert(&entry.prompt, values)?;
        }
        Ok(archive)
    }

    pub fn write(&self, dir: &Path) -> Result<(), DisentangleError> {
        let io = |e: std::io::Error| DisentangleError::Archive(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut entries = Vec::with_capacity(self.latents.len());
        for (i, (prompt, values)) in self.latents.iter().enumerate() {
            let name = format!("{i:05}.f32");
            let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
            fs::write(dir.join(&name), bytes).map_err(io)?;
            entries.push(LatentEntry {
                prompt: prompt.clone(),
                object: None,
                attribute: None,
                category: None,
                path: name,
            });
        }
        let manifest = LatentManifest {
            dim: self.dim,
            editor: self.editor.clone(),
            seed: self.seed,
            entries,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(dir.join(LATENT_MANIFEST), text).map_err(io)
    }
}
