use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_m_prime, maf_of, AttackKind, AttackParameters, ReconstructionResult};
use crate::beacon::FlipSet;
use crate::correlation::CorrelationModel;
use crate::error::{ReconError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyMode {
    /// Highest mean similarity wins; ties go to the lowest bin index.
    Argmax,
    /// Bin drawn with probability proportional to mean similarity.
    Proportional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOptions {
    pub tau: f64,
    pub m_prime: usize,
    pub mode: GreedyMode,
    pub seed: u64,
}

/// Rare-seeded greedy binning.
///
/// Rare loci (MAF below `tau`) seed the bins in ascending MAF order, one per
/// bin; when fewer than `m'` rare loci exist the `m'` lowest-MAF loci are the
/// seeds. Every other locus, again in ascending MAF order, joins the bin whose
/// current contents have the highest mean similarity to it.
pub fn greedy_reconstruct(
    flips: &FlipSet,
    model: &CorrelationModel,
    mafs: &[f64],
    options: &GreedyOptions,
) -> Result<ReconstructionResult> {
    let m_prime = options.m_prime;
    check_m_prime(m_prime)?;
    let mut order: Vec<(f64, usize)> = flips
        .loci
        .iter()
        .map(|&l| maf_of(mafs, l).map(|f| (f, l)))
        .collect::<Result<_>>()?;
    if let Some(&(_, missing)) = order.iter().find(|&&(_, l)| !model.contains(l)) {
        return Err(ReconError::LocusNotInModel(missing));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // rare loci sort first, so the m' lowest-MAF loci are the rare seeds
    // whenever enough rare loci exist
    let seed_count = m_prime.min(order.len());
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); m_prime];
    for (bin, &(_, locus)) in order[..seed_count].iter().enumerate() {
        bins[bin].push(locus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut means = vec![0.0; m_prime];
    for &(_, locus) in &order[seed_count..] {
        for (c, bin) in bins.iter().enumerate() {
            means[c] = if bin.is_empty() {
                f64::NEG_INFINITY
            } else {
                let mut sum = 0.0;
                for &other in bin {
                    sum += model.similarity(locus, other)?;
                }
                sum / bin.len() as f64
            };
        }
        let choice = match options.mode {
            GreedyMode::Argmax => argmax_lowest(&means),
            GreedyMode::Proportional => sample_proportional(&means, &mut rng),
        };
        bins[choice].push(locus);
    }

    Ok(ReconstructionResult::new(
        AttackParameters {
            attack: AttackKind::Greedy,
            m: None,
            m_prime,
            tau: Some(options.tau),
            seed: options.seed,
        },
        bins,
    ))
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn sample_proportional<R: Rng>(means: &[f64], rng: &mut R) -> usize {
    let weights: Vec<f64> = means
        .iter()
        .map(|&m| if m > 0.0 { m } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..means.len());
    }
    let mut target = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
