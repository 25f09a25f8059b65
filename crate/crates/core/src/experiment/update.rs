use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::oracle_bin;
use crate::attacks::{run_attack, AttackConfig, ReconstructionResult};
use crate::beacon::{flip_set, BeaconState, FlipDirection, FlipSet};
use crate::correlation::build_correlation_model;
use crate::error::{ReconError, Result};
use crate::genotype::PopulationDataset;
use crate::phenotype::{identify_victim, train_trait_model, EnsembleClassifier, TrainConfig};

/// Redraws allowed before a scenario is declared unattainable.
pub const MAX_DRAWS: usize = 100;

/// SplitMix64 finalizer over the mixed inputs; used to derive independent
/// per-trial seeds from one base seed.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(base ^ mix(a ^ mix(b)))
}

/// Donor indices for one beacon update. The victim is `newcomers[0]`; the
/// reference feeds the correlation model and the phenotype models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateDraw {
    pub members: Vec<usize>,
    pub newcomers: Vec<usize>,
    pub reference: Vec<usize>,
}

impl UpdateDraw {
    /// Disjoint random draw of `n` members and `m` newcomers; everyone else
    /// is reference.
    pub fn random<R: Rng + ?Sized>(donors: usize, n: usize, m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(ReconError::InvalidArgument("m must be at least 1".into()));
        }
        if n + m >= donors {
            return Err(ReconError::Dataset(format!(
                "population has {donors} donors; {n} members and {m} newcomers leave no reference"
            )));
        }
        let mut order: Vec<usize> = (0..donors).collect();
        order.shuffle(rng);
        let reference = order.split_off(n + m);
        let newcomers = order.split_off(n);
        Ok(Self {
            members: order,
            newcomers,
            reference,
        })
    }

    pub fn victim(&self) -> usize {
        self.newcomers[0]
    }
}

/// No-to-yes flips caused by adding `newcomers` to a beacon of `members`.
pub fn update_flips(
    pop: &PopulationDataset,
    members: &[usize],
    newcomers: &[usize],
) -> Result<FlipSet> {
    let pick = |ids: &[usize]| {
        ids.iter()
            .map(|&i| pop.genotypes[i].clone())
            .collect::<Vec<_>>()
    };
    let before = BeaconState::with_members(pop.num_snps(), pick(members))?;
    let after = before.update(pick(newcomers), &[])?;
    flip_set(
        &before.snapshot(),
        &after.snapshot(),
        FlipDirection::NoToYes,
    )
}

/// Minor-presence bits of `donor` over `universe`.
pub fn truth_over(pop: &PopulationDataset, donor: usize, universe: &[usize]) -> Vec<bool> {
    let g = &pop.genotypes[donor];
    universe.iter().map(|&l| g.values[l].has_minor()).collect()
}

/// Runs `attack` on the flips, with the correlation model built from the
/// reference donors over the flip loci.
pub fn reconstruct(
    pop: &PopulationDataset,
    reference: &[usize],
    flips: &FlipSet,
    attack: &AttackConfig,
    seed: u64,
) -> Result<ReconstructionResult> {
    let model = if attack.kind.needs_model() {
        Some(build_correlation_model(
            &pop.select_donors(reference),
            &flips.loci,
        )?)
    } else {
        None
    };
    run_attack(attack, flips, model.as_ref(), &pop.mafs(), seed)
}

/// A seeded draw whose victim has at least one flip and whose flip set can
/// fill `min_beta` bins.
pub fn draw_attackable<R: Rng + ?Sized>(
    pop: &PopulationDataset,
    n: usize,
    m: usize,
    min_beta: usize,
    rng: &mut R,
) -> Result<(UpdateDraw, FlipSet)> {
    for attempt in 0..MAX_DRAWS {
        let draw = UpdateDraw::random(pop.num_donors(), n, m, rng)?;
        let flips = update_flips(pop, &draw.members, &draw.newcomers)?;
        if flips.beta() >= min_beta && truth_over(pop, draw.victim(), &flips.loci).contains(&true) {
            if attempt > 0 {
                log::debug!("accepted draw after {attempt} redraws");
            }
            return Ok((draw, flips));
        }
    }
    Err(ReconError::Dataset(format!(
        "no draw in {MAX_DRAWS} attempts gave the victim a flip with at least {min_beta} flip loci"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentificationMode {
    /// The bin with the highest F1 against the victim's truth.
    #[default]
    Oracle,
    /// Phenotype ensemble matching, falling back to the oracle when no
    /// trait model survives.
    Phenotype,
}

/// How the victim's bin was actually chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identified {
    Oracle,
    Phenotype,
    OracleFallback,
}

impl fmt::Display for Identified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Identified::Oracle => "oracle",
            Identified::Phenotype => "phenotype",
            Identified::OracleFallback => "oracle-fallback",
        })
    }
}

/// Trains one model per trait on the reference over the flip loci and
/// keeps the retained ones. Traits that cannot be trained are skipped.
pub fn train_ensemble(
    pop: &PopulationDataset,
    reference: &[usize],
    flips: &FlipSet,
    train: &TrainConfig,
) -> Result<EnsembleClassifier> {
    let table = pop
        .phenotypes
        .as_ref()
        .ok_or_else(|| ReconError::Dataset("population has no phenotypes".into()))?;
    let training = pop.select_donors(reference);
    let mut models = Vec::new();
    for name in table.trait_names() {
        match train_trait_model(&training, &name, &flips.loci, train) {
            Ok(model) => models.push(model),
            Err(e @ (ReconError::DegenerateTrait(_) | ReconError::TooFewSamples { .. })) => {
                log::debug!("skipping trait {name}: {e}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(EnsembleClassifier::from_models(models))
}

/// Picks the victim's bin. Returns the chosen bin and how it was chosen.
pub fn identify(
    pop: &PopulationDataset,
    draw: &UpdateDraw,
    flips: &FlipSet,
    result: &ReconstructionResult,
    mode: IdentificationMode,
    train: &TrainConfig,
) -> Result<(usize, Identified)> {
    let truth = truth_over(pop, draw.victim(), &flips.loci);
    let oracle = || oracle_bin(result, &flips.loci, &truth);
    match mode {
        IdentificationMode::Oracle => Ok((oracle()?, Identified::Oracle)),
        IdentificationMode::Phenotype => {
            let ensemble = train_ensemble(pop, &draw.reference, flips, train)?;
            let profile = pop
                .phenotypes
                .as_ref()
                .map(|t| t.profile(&pop.genotypes[draw.victim()].donor_id))
                .unwrap_or_default();
            match identify_victim(result, &profile, &ensemble) {
                Ok(bin) => Ok((bin, Identified::Phenotype)),
                Err(e @ (ReconError::EmptyEnsemble | ReconError::NoUsableTrait)) => {
                    log::debug!("phenotype identification unavailable ({e}); using the oracle");
                    Ok((oracle()?, Identified::OracleFallback))
                }
                Err(e) => Err(e),
            }
        }
    }
}
