use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::archive::LatentArchive;
use super::grid::{AttributeCategory, PromptGrid};
use super::DisentangleError;

pub const NUM_CLASSES: usize = 4;
pub const DEFAULT_CLASS_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct ZDiffExample {
    pub features: Vec<f64>,
    pub label: AttributeCategory,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZDiffDataset {
    pub examples: Vec<ZDiffExample>,
    pub notes: Vec<String>,
}

/// Element-wise `|a - b|`.
pub fn abs_diff(a: &[f32], b: &[f32]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).collect()
}

/// One example per attribute and unordered object pair, then at most `cap`
/// examples per class chosen by a generator seeded with `seed`.
pub fn build_zdiff_dataset(archive: &LatentArchive, grid: &PromptGrid, cap: usize, seed: u64) -> ZDiffDataset {
    let mut out = ZDiffDataset::default();
    let bare = grid.prompts.iter().filter(|p| p.object.is_none());
    for attr in bare {
        let [label] = attr.categories[..] else {
            out.notes.push(format!(
                "attribute `{}` belongs to several categories; skipped",
                attr.attribute
            ));
            continue;
        };
        let latents: Vec<&[f32]> = grid
            .objects
            .iter()
            .filter_map(|o| archive.get(&super::grid::prompt_for(&attr.attribute, Some(o))))
            .collect();
        if latents.len() < 2 {
            out.notes.push(format!(
                "attribute `{}` has {} object latents; skipped",
                attr.attribute,
                latents.len()
            ));
            continue;
        }
        for i in 0..latents.len() {
            for j in i + 1..latents.len() {
                out.examples.push(ZDiffExample {
                    features: abs_diff(latents[i], latents[j]),
                    label,
                });
            }
        }
    }
    subsample(&mut out, cap, seed);
    out
}

/// Keeps at most `cap` examples per class, preserving relative order.
pub fn subsample(ds: &mut ZDiffDataset, cap: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; ds.examples.len()];
    for class in AttributeCategory::ALL {
        let members: Vec<usize> = (0..ds.examples.len())
            .filter(|&i| ds.examples[i].label == class)
            .collect();
        if members.len() <= cap {
            continue;
        }
        let mut chosen = vec![false; members.len()];
        for k in index::sample(&mut rng, members.len(), cap).into_iter() {
            chosen[k] = true;
        }
        for (k, &i) in members.iter().enumerate() {
            keep[i] = chosen[k];
        }
        ds.notes
            .push(format!("{class}: sampled {cap} of {} examples", members.len()));
    }
    let mut it = keep.iter();
    ds.examples.retain(|_| *it.next().expect("same length"));
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub test_fraction: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            test_fraction: 0.3,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

/// Softmax regression over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearModel {
    fn logits_standardized(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bias[k] + self.weights[k].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Predicted class index; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.standardize(x);
        let mut logits = vec![0.0; self.bias.len()];
        self.logits_standardized(&z, &mut logits);
        argmax(&logits)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub classes: Vec<String>,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    /// Rows are actual classes, columns predictions.
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
    pub train_size: usize,
    pub test_size: usize,
    pub epochs: usize,
    pub final_train_loss: f64,
}

/// Stratified split: `(train, test)` index lists in ascending order.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in 0..NUM_CLASSES {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n = members.len();
        let n_test = ((n as f64 * test_fraction).round() as usize).min(n.saturating_sub(1));
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn train_linear_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    cfg: &ClassifierConfig,
) -> Result<(LinearModel, ClassifierReport), DisentangleError> {
    if features.is_empty() {
        return Err(DisentangleError::EmptyDataset);
    }
    let present = (0..NUM_CLASSES).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(DisentangleError::DegenerateDataset(format!(
            "{present} class(es) present"
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(DisentangleError::DegenerateDataset("feature lengths differ".into()));
    }
    let (train, test) = stratified_split(labels, cfg.test_fraction, cfg.seed);
    if test.is_empty() {
        return Err(DisentangleError::DegenerateDataset("test split is empty".into()));
    }

    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for &i in &train {
        for (m, v) in mean.iter_mut().zip(&features[i]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scale = vec![0.0; dim];
    for &i in &train {
        for ((s, v), m) in scale.iter_mut().zip(&features[i]).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    scale.iter_mut().for_each(|s| {
        let sd = (*s / n).sqrt();
        *s = if sd > 0.0 { sd } else { 1.0 };
    });

    let mut model = LinearModel {
        weights: vec![vec![0.0; dim]; NUM_CLASSES],
        bias: vec![0.0; NUM_CLASSES],
        mean,
        scale,
    };
    let xs: Vec<Vec<f64>> = train.iter().map(|&i| model.standardize(&features[i])).collect();
    let ys: Vec<usize> = train.iter().map(|&i| labels[i]).collect();

    let mut probs = vec![0.0; NUM_CLASSES];
    let mut loss = 0.0;
    for _ in 0..cfg.epochs {
        let mut grad_w = vec![vec![0.0; dim]; NUM_CLASSES];
        let mut grad_b = [0.0; NUM_CLASSES];
        loss = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            model.logits_standardized(x, &mut probs);
            softmax_in_place(&mut probs);
            loss -= probs[y].max(f64::MIN_POSITIVE).ln();
            for k in 0..NUM_CLASSES {
                let g = probs[k] - if k == y { 1.0 } else { 0.0 };
                grad_b[k] += g;
                for (gw, v) in grad_w[k].iter_mut().zip(x) {
                    *gw += g * v;
                }
            }
        }
        loss /= n;
        let step = cfg.learning_rate / n;
        for k in 0..NUM_CLASSES {
            model.bias[k] -= step * grad_b[k];
            for (w, g) in model.weights[k].iter_mut().zip(&grad_w[k]) {
                *w -= step * g;
            }
        }
    }

    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for &i in &test {
        confusion[labels[i]][model.predict(&features[i])] += 1;
    }
    let correct: u64 = (0..NUM_CLASSES).map(|k| confusion[k][k]).sum();
    let accuracy = correct as f64 / test.len() as f64;
    let recalls: Vec<f64> = (0..NUM_CLASSES)
        .filter_map(|k| {
            let row: u64 = confusion[k].iter().sum();
            (row > 0).then(|| confusion[k][k] as f64 / row as f64)
        })
        .collect();
    let balanced_accuracy = recalls.iter().sum::<f64>() / recalls.len() as f64;

    let report = ClassifierReport {
        classes: AttributeCategory::ALL.iter().map(|c| c.as_str().to_string()).collect(),
        accuracy,
        balanced_accuracy,
        confusion,
        train_size: train.len(),
        test_size: test.len(),
        epochs: cfg.epochs,
        final_train_loss: loss,
    };
    Ok((model, report))
}
