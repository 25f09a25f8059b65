//! Synthetic populations with planted correlation blocks.
//!
//! Each block carries a per-donor latent bit drawn with the block's carrier
//! probability `q = 1 - (1 - maf)^2`. Every locus in the block copies the
//! latent bit with probability `within_block_agreement` and otherwise draws a
//! fresh independent bit with the same probability `q`, so the column MAF
//! stays at the block MAF for any agreement level. A present bit becomes a
//! homozygous-minor call with probability `maf^2 / q`, heterozygous otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Call, Genotype, PopulationDataset, SnpDef};
use crate::error::{ReconError, Result};

/// Distance between consecutive synthetic SNPs, in base pairs.
const SNP_SPACING: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_donors: usize,
    pub block_sizes: Vec<usize>,
    pub per_block_maf: Vec<f64>,
    pub within_block_agreement: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.len() != self.per_block_maf.len() {
            return Err(ReconError::InvalidArgument(format!(
                "{} block sizes but {} block mafs",
                self.block_sizes.len(),
                self.per_block_maf.len()
            )));
        }
        if let Some(f) = self
            .per_block_maf
            .iter()
            .find(|f| !(0.0..=0.5).contains(*f))
        {
            return Err(ReconError::InvalidArgument(format!(
                "block maf {f} outside [0, 0.5]"
            )));
        }
        if !(0.0..=1.0).contains(&self.within_block_agreement) {
            return Err(ReconError::InvalidArgument(format!(
                "agreement {} outside [0, 1]",
                self.within_block_agreement
            )));
        }
        Ok(())
    }

    pub fn num_snps(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// The panel shared by every population drawn from this spec.
    pub fn panel(&self) -> Vec<SnpDef> {
        let mut panel = Vec::with_capacity(self.num_snps());
        for (&size, &maf) in self.block_sizes.iter().zip(&self.per_block_maf) {
            for _ in 0..size {
                let j = panel.len();
                panel.push(SnpDef {
                    id: format!("snp{j}"),
                    chromosome: "1".to_string(),
                    position: (j as u64 + 1) * SNP_SPACING,
                    maf,
                });
            }
        }
        panel
    }

    /// Index range of each block within the panel.
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.block_sizes
            .iter()
            .map(|&size| {
                let r = start..start + size;
                start += size;
                r
            })
            .collect()
    }
}

/// Draws single donors from a [`SyntheticSpec`].
#[derive(Debug, Clone)]
pub struct DonorSampler {
    blocks: Vec<(usize, f64)>,
    agreement: f64,
}

impl DonorSampler {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            blocks: spec
                .block_sizes
                .iter()
                .copied()
                .zip(spec.per_block_maf.iter().copied())
                .collect(),
            agreement: spec.within_block_agreement,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, donor_id: impl Into<String>, rng: &mut R) -> Genotype {
        let mut values = Vec::with_capacity(self.blocks.iter().map(|b| b.0).sum());
        for &(size, maf) in &self.blocks {
            let carrier = 1.0 - (1.0 - maf) * (1.0 - maf);
            let hom_minor = if carrier > 0.0 {
                maf * maf / carrier
            } else {
                0.0
            };
            let latent = rng.gen::<f64>() < carrier;
            for _ in 0..size {
                let bit = if rng.gen::<f64>() < self.agreement {
                    latent
                } else {
                    rng.gen::<f64>() < carrier
                };
                let call = if !bit {
                    Call::HomMajor
                } else if rng.gen::<f64>() < hom_minor {
                    Call::HomMinor
                } else {
                    Call::Het
                };
                values.push(call);
            }
        }
        Genotype::new(donor_id, values)
    }
}

/// Generates `spec.num_donors` donors named `d0`, `d1`, ...; deterministic in `seed`.
pub fn generate_synthetic_population(spec: &SyntheticSpec, seed: u64) -> Result<PopulationDataset> {
    let sampler = DonorSampler::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genotypes = (0..spec.num_donors)
        .map(|i| sampler.sample(format!("d{i}"), &mut rng))
        .collect();
    PopulationDataset::new(spec.panel(), genotypes)
}
