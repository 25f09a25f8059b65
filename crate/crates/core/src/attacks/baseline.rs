use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_m_prime, maf_of, AttackKind, AttackParameters, ReconstructionResult};
use crate::beacon::FlipSet;
use crate::error::Result;

/// Probability that a random genome carries at least one minor allele under
/// Hardy-Weinberg proportions: `f^2 + 2f(1 - f)`.
pub fn presence_probability(maf: f64) -> f64 {
    maf * maf + 2.0 * maf * (1.0 - maf)
}

/// Independent MAF-driven assignment. Each flip locus enters each bin with
/// [`presence_probability`]; a locus that lands in no bin is put into one
/// uniformly chosen bin.
pub fn baseline_reconstruct(
    flips: &FlipSet,
    mafs: &[f64],
    m_prime: usize,
    seed: u64,
) -> Result<ReconstructionResult> {
    check_m_prime(m_prime)?;
    let probs = flips
        .loci
        .iter()
        .map(|&l| maf_of(mafs, l).map(presence_probability))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins = vec![Vec::new(); m_prime];
    for (&locus, &p) in flips.loci.iter().zip(&probs) {
        let mut assigned = false;
        for bin in bins.iter_mut() {
            if rng.gen::<f64>() < p {
                bin.push(locus);
                assigned = true;
            }
        }
        if !assigned {
            bins[rng.gen_range(0..m_prime)].push(locus);
        }
    }
    Ok(ReconstructionResult::new(
        AttackParameters {
            attack: AttackKind::Baseline,
            m: None,
            m_prime,
            tau: None,
            seed,
        },
        bins,
    ))
}
