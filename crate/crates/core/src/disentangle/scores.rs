use super::DisentangleError;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Latents for one object under an attribute swap `a1 -> a2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTuple {
    pub z_start: Vec<f64>,
    pub z_a1: Vec<f64>,
    pub z_a2: Vec<f64>,
    pub z_end: Vec<f64>,
}

/// `‖z_end − (z_start + z_a2 − z_a1)‖ / ‖z_end‖`.
pub fn intra_sample_score(t: &LatentTuple) -> Result<f64, DisentangleError> {
    let denom = norm(&t.z_end);
    if denom == 0.0 {
        return Err(DisentangleError::DegenerateLatent("z_end has zero norm".into()));
    }
    let residual: Vec<f64> = (0..t.z_end.len())
        .map(|i| t.z_end[i] - (t.z_start[i] + t.z_a2[i] - t.z_a1[i]))
        .collect();
    Ok(norm(&residual) / denom)
}

/// Mean squared cosine similarity over all unordered pairs of directions.
pub fn inter_sample_score(directions: &[Vec<f64>]) -> Result<f64, DisentangleError> {
    if directions.len() < 2 {
        return Err(DisentangleError::DegenerateLatent(
            "need at least two directions".into(),
        ));
    }
    let norms: Vec<f64> = directions.iter().map(|d| norm(d)).collect();
    if norms.contains(&0.0) {
        return Err(DisentangleError::DegenerateLatent("zero direction vector".into()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..directions.len() {
        for j in i + 1..directions.len() {
            let dot: f64 = directions[i].iter().zip(&directions[j]).map(|(a, b)| a * b).sum();
            let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            total += cos * cos;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
