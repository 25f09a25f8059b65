use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::metrics::{oracle_bin, precision_recall, risk_percentile};
use super::update::{reconstruct, truth_over, update_flips};
use crate::attacks::AttackConfig;
use crate::error::{ReconError, Result};
use crate::genotype::PopulationDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Share of the donor's flip-set minor alleles recovered by the best bin.
    pub fraction: f64,
    /// The same share for each baseline genome placed in the donor's slot.
    pub baseline: Vec<f64>,
    pub percentile: f64,
}

/// Donor indices for a risk assessment. `batch` holds the other `m - 1`
/// newcomers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskSetup {
    pub donor: usize,
    pub members: Vec<usize>,
    pub batch: Vec<usize>,
    pub baseline_pool: Vec<usize>,
    pub reference: Vec<usize>,
}

impl RiskSetup {
    fn validate(&self) -> Result<()> {
        if self.baseline_pool.is_empty() {
            return Err(ReconError::InvalidArgument(
                "baseline cohort is empty".into(),
            ));
        }
        let mut seen = HashSet::new();
        let groups = [
            std::slice::from_ref(&self.donor),
            &self.members,
            &self.batch,
            &self.baseline_pool,
            &self.reference,
        ];
        for &i in groups.iter().copied().flatten() {
            if !seen.insert(i) {
                return Err(ReconError::InvalidArgument(format!(
                    "donor index {i} appears in more than one role"
                )));
            }
        }
        if self.reference.is_empty() {
            return Err(ReconError::InvalidArgument(
                "reference population is empty".into(),
            ));
        }
        Ok(())
    }
}

/// Recall of the best bin for `candidate` joining alongside `batch`. A
/// candidate with no flip-set minor allele exposes nothing and scores 0.
fn reconstructed_fraction(
    pop: &PopulationDataset,
    setup: &RiskSetup,
    candidate: usize,
    attack: &AttackConfig,
    seed: u64,
) -> Result<f64> {
    let mut newcomers = vec![candidate];
    newcomers.extend(&setup.batch);
    let flips = update_flips(pop, &setup.members, &newcomers)?;
    let truth = truth_over(pop, candidate, &flips.loci);
    if !truth.contains(&true) {
        return Ok(0.0);
    }
    let mut attack = attack.clone();
    attack.m_prime = attack.m_prime.min(flips.beta());
    let result = reconstruct(pop, &setup.reference, &flips, &attack, seed)?;
    let bin = oracle_bin(&result, &flips.loci, &truth)?;
    Ok(
        precision_recall(&truth, &result.bin_indicator(bin, &flips.loci))?
            .recall()
            .unwrap_or(0.0),
    )
}

/// Attacks the donor's pretend addition, repeats the attack with each
/// baseline genome in the donor's slot, and ranks the donor among them.
pub fn quantify_risk(
    pop: &PopulationDataset,
    setup: &RiskSetup,
    attack: &AttackConfig,
    seed: u64,
) -> Result<RiskReport> {
    setup.validate()?;
    let fraction = reconstructed_fraction(pop, setup, setup.donor, attack, seed)?;
    let baseline = setup
        .baseline_pool
        .iter()
        .map(|&c| reconstructed_fraction(pop, setup, c, attack, seed))
        .collect::<Result<Vec<f64>>>()?;
    let percentile = risk_percentile(fraction, &baseline)?;
    Ok(RiskReport {
        fraction,
        baseline,
        percentile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::AttackKind;
    use crate::experiment::SyntheticConfig;

    fn setup(pool: Vec<usize>) -> RiskSetup {
        RiskSetup {
            donor: 0,
            members: (1..41).collect(),
            batch: vec![41, 42],
            baseline_pool: pool,
            reference: (60..300).collect(),
        }
    }

    #[test]
    fn percentile_in_range_and_pool_order_irrelevant() {
        let pop = "synthetic:donors=300,seed=8"
            .parse::<SyntheticConfig>()
            .unwrap()
            .generate()
            .unwrap();
        let attack = AttackConfig::new(AttackKind::Spectral, 3);
        let a = quantify_risk(&pop, &setup((43..55).collect()), &attack, 1).unwrap();
        assert!((0.0..=100.0).contains(&a.percentile));
        assert!(a
            .baseline
            .iter()
            .chain([&a.fraction])
            .all(|f| (0.0..=1.0).contains(f)));
        let b = quantify_risk(&pop, &setup((43..55).rev().collect()), &attack, 1).unwrap();
        assert_eq!(a.percentile, b.percentile);
        assert_eq!(a.fraction, b.fraction);
    }

    #[test]
    fn contract_errors() {
        let pop = "synthetic:donors=300,seed=8"
            .parse::<SyntheticConfig>()
            .unwrap()
            .generate()
            .unwrap();
        let attack = AttackConfig::new(AttackKind::Greedy, 3);
        assert!(quantify_risk(&pop, &setup(vec![]), &attack, 0).is_err());
        assert!(quantify_risk(&pop, &setup(vec![1]), &attack, 0).is_err());
    }
}
