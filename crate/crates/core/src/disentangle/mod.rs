//! Latent-space disentanglement analysis.
//!
//! Three measurements over a [`LatentArchive`]:
//! intra-sample compositionality of attribute swaps, the consistency of
//! swap directions across objects, and a linear Z-diff classifier that
//! predicts the attribute category from absolute latent differences.

mod archive;
mod grid;
mod scores;
mod zdiff;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{normalize_prompt, LatentArchive, LatentEntry, LatentManifest, LATENT_MANIFEST};
pub use grid::{
    build_prompt_grid, categories_of, prompt_for, AttributeCategory, CategoryPairs, PromptEntry, PromptGrid, OBJECTS,
};
pub use scores::{inter_sample_score, intra_sample_score, LatentTuple};
pub use zdiff::{
    abs_diff, build_zdiff_dataset, stratified_split, subsample, train_linear_classifier, ClassifierConfig,
    ClassifierReport, LinearModel, ZDiffDataset, ZDiffExample, DEFAULT_CLASS_CAP, NUM_CLASSES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisentangleError {
    #[error("latent archive: {0}")]
    Archive(String),
    #[error("degenerate latent: {0}")]
    DegenerateLatent(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisentangleConfig {
    pub classifier: ClassifierConfig,
    pub class_cap: usize,
}

impl Default for DisentangleConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierConfig::default(),
            class_cap: DEFAULT_CLASS_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMeans {
    pub overall: f64,
    pub per_category: BTreeMap<AttributeCategory, f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisentanglementReport {
    pub dim: usize,
    pub editor: Option<String>,
    /// Mean normalized residual; lower is better.
    pub intra_sample: CategoryMeans,
    /// Mean squared cosine of swap directions; higher is better.
    pub inter_sample: CategoryMeans,
    pub inter_attribute: ClassifierReport,
    pub notes: Vec<String>,
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|x| *x as f64).collect()
}

fn means(scores: &[(AttributeCategory, f64)]) -> Option<CategoryMeans> {
    if scores.is_empty() {
        return None;
    }
    let mut per: BTreeMap<AttributeCategory, (f64, usize)> = BTreeMap::new();
    for (c, s) in scores {
        let e = per.entry(*c).or_insert((0.0, 0));
        e.0 += s;
        e.1 += 1;
    }
    Some(CategoryMeans {
        overall: scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64,
        per_category: per.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect(),
        samples: scores.len(),
    })
}

/// Tuples for every category, attribute pair and object whose four latents
/// are present, plus the number of incomplete tuples.
pub fn collect_tuples(
    archive: &LatentArchive,
    grid: &PromptGrid,
) -> (Vec<(AttributeCategory, String, LatentTuple)>, usize) {
    let mut out = Vec::new();
    let mut missing = 0;
    for cat in &grid.categories {
        for [a1, a2] in &cat.pairs {
            for obj in &grid.objects {
                let get = |p: String| archive.get(&p).map(to_f64);
                match (
                    get(prompt_for(a1, Some(obj))),
                    get(prompt_for(a1, None)),
                    get(prompt_for(a2, None)),
                    get(prompt_for(a2, Some(obj))),
                ) {
                    (Some(z_start), Some(z_a1), Some(z_a2), Some(z_end)) => out.push((
                        cat.category,
                        format!("{a1}->{a2}"),
                        LatentTuple {
                            z_start,
                            z_a1,
                            z_a2,
                            z_end,
                        },
                    )),
                    _ => missing += 1,
                }
            }
        }
    }
    (out, missing)
}

pub fn analyze(
    archive: &LatentArchive,
    grid: &PromptGrid,
    cfg: &DisentangleConfig,
) -> Result<DisentanglementReport, DisentangleError> {
    let mut notes = Vec::new();
    let (tuples, missing) = collect_tuples(archive, grid);
    if missing > 0 {
        notes.push(format!("{missing} tuples skipped for missing latents"));
    }

    let mut intra = Vec::with_capacity(tuples.len());
    for (cat, _, t) in &tuples {
        intra.push((*cat, intra_sample_score(t)?));
    }
    let intra_sample = means(&intra).ok_or(DisentangleError::EmptyDataset)?;

    let mut by_pair: BTreeMap<(AttributeCategory, &str), Vec<Vec<f64>>> = BTreeMap::new();
    for (cat, pair, t) in &tuples {
        let dir = t.z_end.iter().zip(&t.z_start).map(|(e, s)| e - s).collect();
        by_pair.entry((*cat, pair.as_str())).or_default().push(dir);
    }
    let mut inter = Vec::new();
    for ((cat, pair), dirs) in &by_pair {
        if dirs.len() < 2 {
            notes.push(format!("{cat} pair {pair}: fewer than two objects; skipped"));
            continue;
        }
        inter.push((*cat, inter_sample_score(dirs)?));
    }
    let inter_sample = means(&inter).ok_or(DisentangleError::EmptyDataset)?;

    let ds = build_zdiff_dataset(archive, grid, cfg.class_cap, cfg.classifier.seed);
    notes.extend(ds.notes.iter().cloned());
    let features: Vec<Vec<f64>> = ds.examples.iter().map(|e| e.features.clone()).collect();
    let labels: Vec<usize> = ds.examples.iter().map(|e| e.label.index()).collect();
    let (_, inter_attribute) = train_linear_classifier(&features, &labels, &cfg.classifier)?;

    Ok(DisentanglementReport {
        dim: archive.dim,
        editor: archive.editor.clone(),
        intra_sample,
        inter_sample,
        inter_attribute,
        notes,
    })
}
