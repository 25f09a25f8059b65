use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::update::{update_flips, UpdateDraw};
use crate::beacon::FlipSet;
use crate::error::{ReconError, Result};
use crate::genotype::{generate_synthetic_population, Genotype, PopulationDataset, SyntheticSpec};
use crate::phenotype::plant_traits;

/// A population where newcomer `i` alone carries planted block `i` and the
/// beacon carries no planted allele, so the flips are exactly the planted
/// loci the newcomers carry. Background blocks are common enough that the
/// beacon always answers yes there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub m: usize,
    pub block_size: usize,
    pub planted_maf: f64,
    pub background_blocks: usize,
    pub background_maf: f64,
    pub agreement: f64,
    pub donors: usize,
    pub n: usize,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            m: 3,
            block_size: 5,
            planted_maf: 0.3,
            background_blocks: 20,
            background_maf: 0.45,
            agreement: 1.0,
            donors: 2000,
            n: 50,
        }
    }
}

impl PlantedConfig {
    pub fn spec(&self) -> SyntheticSpec {
        let blocks = self.m + self.background_blocks;
        SyntheticSpec {
            num_donors: self.donors,
            block_sizes: vec![self.block_size; blocks],
            per_block_maf: (0..blocks)
                .map(|b| {
                    if b < self.m {
                        self.planted_maf
                    } else {
                        self.background_maf
                    }
                })
                .collect(),
            within_block_agreement: self.agreement,
        }
    }

    /// Panel range of planted block `i`.
    pub fn block(&self, i: usize) -> Range<usize> {
        i * self.block_size..(i + 1) * self.block_size
    }

    /// Trait `trait{i}` is the presence bit of the first locus of block `i`.
    pub fn trait_loci(&self) -> Vec<(String, usize)> {
        (0..self.m)
            .map(|i| (format!("trait{i}"), self.block(i).start))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub config: PlantedConfig,
    pub population: PopulationDataset,
    pub draw: UpdateDraw,
    pub flips: FlipSet,
}

impl PlantedInstance {
    /// Flip loci each newcomer carries, in newcomer order.
    pub fn true_bins(&self) -> Vec<Vec<usize>> {
        self.draw
            .newcomers
            .iter()
            .map(|&d| {
                let g = &self.population.genotypes[d];
                self.flips
                    .loci
                    .iter()
                    .copied()
                    .filter(|&l| g.values[l].has_minor())
                    .collect()
            })
            .collect()
    }
}

fn carries_any(g: &Genotype, loci: Range<usize>) -> bool {
    loci.into_iter().any(|l| g.values[l].has_minor())
}

/// Draws one planted instance; deterministic in `seed`.
pub fn planted_instance(config: &PlantedConfig, seed: u64) -> Result<PlantedInstance> {
    if config.m == 0 || config.block_size == 0 {
        return Err(ReconError::InvalidArgument(
            "planted scenario needs m >= 1 and blocks of size >= 1".into(),
        ));
    }
    let data = generate_synthetic_population(&config.spec(), seed)?;
    let population = data
        .clone()
        .with_phenotypes(plant_traits(&data, &config.trait_loci())?);
    let planted = 0..config.m * config.block_size;
    let mut order: Vec<usize> = (0..population.num_donors()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut members = Vec::with_capacity(config.n);
    let mut newcomers: Vec<Option<usize>> = vec![None; config.m];
    let mut reference = Vec::new();
    for &d in &order {
        let g = &population.genotypes[d];
        if members.len() < config.n && !carries_any(g, planted.clone()) {
            members.push(d);
            continue;
        }
        let owner = (0..config.m).find(|&i| {
            newcomers[i].is_none()
                && g.values[config.block(i).start].has_minor()
                && (0..config.m).all(|j| j == i || !carries_any(g, config.block(j)))
        });
        match owner {
            Some(i) => newcomers[i] = Some(d),
            None => reference.push(d),
        }
    }
    let newcomers: Option<Vec<usize>> = newcomers.into_iter().collect();
    let Some(newcomers) = newcomers.filter(|_| members.len() == config.n) else {
        return Err(ReconError::Dataset(format!(
            "{} donors cannot supply {} clean members and {} planted newcomers",
            config.donors, config.n, config.m
        )));
    };
    let flips = update_flips(&population, &members, &newcomers)?;
    Ok(PlantedInstance {
        config: config.clone(),
        population,
        draw: UpdateDraw {
            members,
            newcomers,
            reference,
        },
        flips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_blocks_flip_whole() {
        let cfg = PlantedConfig {
            donors: 600,
            ..Default::default()
        };
        let inst = planted_instance(&cfg, 3).unwrap();
        let expected: Vec<usize> = (0..cfg.m * cfg.block_size).collect();
        assert_eq!(inst.flips.loci, expected);
        let bins = inst.true_bins();
        for (i, bin) in bins.iter().enumerate() {
            assert_eq!(bin, &cfg.block(i).collect::<Vec<_>>());
        }
        let table = inst.population.phenotypes.as_ref().unwrap();
        let victim = &inst.population.genotypes[inst.draw.victim()].donor_id;
        assert_eq!(table.value(victim, "trait0"), Some(true));
        assert_eq!(table.value(victim, "trait1"), Some(false));
    }

    #[test]
    fn too_small_population_errors() {
        let cfg = PlantedConfig {
            donors: 20,
            ..Default::default()
        };
        assert!(planted_instance(&cfg, 0).is_err());
    }
}
