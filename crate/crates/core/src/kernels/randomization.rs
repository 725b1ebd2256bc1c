use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ReflectionSet;
use crate::error::Result;
use crate::linalg::{check_psd, complex_normal, CMatrix, CVector, C64};
use crate::metrics::sr_mmse;
use crate::scenario::ChannelSet;

/// Ratio below which the second eigenvalue is treated as zero.
const RANK_ONE_RATIO: f64 = 1e-8;

/// Recovers a feasible reflection vector from a relaxed solution, scoring
/// candidates by the true MMSE sum rate.
pub fn extract_rank_one(
    x_star: &CMatrix,
    channels: &ChannelSet,
    p: &DVector<f64>,
    set: ReflectionSet,
    randomization_count: usize,
    seed: u64,
) -> Result<CVector> {
    let objective = |g: &CVector| sr_mmse(g, p, channels).unwrap_or(f64::NEG_INFINITY);
    extract_rank_one_by(x_star, objective, set, randomization_count, seed)
}

/// Rank-one case: the principal eigenvector scaled to `sqrt(tr X)` (moduli
/// clipped under a local constraint). Otherwise candidate 0 is the saturated
/// principal eigenvector and candidates `1..=count` are saturated draws from
/// `CN(0, X)`; the first best candidate wins.
pub fn extract_rank_one_by<F>(
    x_star: &CMatrix,
    objective: F,
    set: ReflectionSet,
    randomization_count: usize,
    seed: u64,
) -> Result<CVector>
where
    F: Fn(&CVector) -> f64,
{
    let eig = check_psd(x_star)?;
    let n = x_star.nrows();
    let top = eig.max();
    let principal: CVector = eig.vectors.column(0).into_owned();
    if top <= 0.0 {
        return Ok(set.saturate(&CVector::zeros(n)));
    }
    let second = eig.values.get(1).copied().unwrap_or(0.0).max(0.0);
    if second < RANK_ONE_RATIO * top {
        let trace: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
        let gamma = &principal * C64::new(trace.sqrt(), 0.0);
        return Ok(set.project(&gamma));
    }

    let factor = CMatrix::from_fn(n, n, |r, c| eig.vectors[(r, c)] * eig.values[c].max(0.0).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = set.saturate(&principal);
    let mut best_value = objective(&best);
    for _ in 0..randomization_count {
        let z = CVector::from_fn(n, |_, _| complex_normal(&mut rng));
        let candidate = set.saturate(&(&factor * z));
        let value = objective(&candidate);
        if value > best_value {
            best_value = value;
            best = candidate;
        }
    }
    Ok(best)
}
