use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{oracle_bin, precision_recall};
use super::update::{
    derive_seed, reconstruct, train_ensemble, truth_over, update_flips, IdentificationMode,
};
use crate::attacks::{AttackConfig, AttackKind, AttackParameters, ReconstructionResult};
use crate::beacon::{BeaconState, FlipSet};
use crate::error::{ReconError, Result};
use crate::genotype::PopulationDataset;
use crate::membership::{
    cohort_traces, effective_delta, null_thresholds, power_from_traces, LrtConfig, PowerCurve,
};
use crate::numeric::mean;
use crate::phenotype::{identify_victim, TrainConfig};

/// Donors set aside per repetition to fill the other newcomer slots.
const FILLER_POOL: usize = 100;

/// Who the alternate cohort is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternateCohort {
    /// Members of the target beacon: the power analysis proper.
    #[default]
    Members,
    /// Non-members, as a self-consistency check of the calibration.
    NonMembers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub b1_size: usize,
    pub b2_size: usize,
    /// Explicit donor ids for the two beacons; drawn at random when `None`.
    pub b1: Option<Vec<String>>,
    pub b2: Option<Vec<String>>,
    pub m: usize,
    pub attack: AttackKind,
    pub m_prime: Option<usize>,
    pub cohort_size: usize,
    pub alpha: f64,
    pub delta: f64,
    pub max_queries: usize,
    /// Identification accuracy for cohort mixing. `None` measures it with
    /// the phenotype stage, or uses 1 under oracle identification.
    pub p: Option<f64>,
    pub identification: IdentificationMode,
    pub alternate: AlternateCohort,
    pub reps: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            b1_size: 50,
            b2_size: 60,
            b1: None,
            b2: None,
            m: 1,
            attack: AttackKind::Spectral,
            m_prime: None,
            cohort_size: 20,
            alpha: 0.05,
            delta: 1e-6,
            max_queries: 40,
            p: None,
            identification: IdentificationMode::Oracle,
            alternate: AlternateCohort::Members,
            reps: 10,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

/// Mean power over repetitions plus what went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutcome {
    pub curve: PowerCurve,
    pub per_rep: Vec<Vec<f64>>,
    /// Mean measured (or configured) identification accuracy.
    pub p: f64,
    /// Mean fraction of correctly identified bin loci the victim lacks.
    pub mismatch: f64,
    /// Mean delta actually used in the statistic.
    pub delta_eff: f64,
}

struct Beacons {
    b1: Vec<usize>,
    b2: Vec<usize>,
    rest: Vec<usize>,
}

fn resolve_ids(pop: &PopulationDataset, ids: &[String]) -> Result<Vec<usize>> {
    let index = pop.donor_index();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| ReconError::Dataset(format!("donor {id} not in population")))
        })
        .collect()
}

fn choose_beacons(
    pop: &PopulationDataset,
    config: &ChainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Beacons> {
    let mut order: Vec<usize> = (0..pop.num_donors()).collect();
    order.shuffle(rng);
    let fixed =
        |ids: &Option<Vec<String>>| ids.as_deref().map(|ids| resolve_ids(pop, ids)).transpose();
    let (fixed1, fixed2) = (fixed(&config.b1)?, fixed(&config.b2)?);
    if let (Some(a), Some(b)) = (&fixed1, &fixed2) {
        if let Some(&shared) = a.iter().find(|i| b.contains(i)) {
            return Err(ReconError::InvalidArgument(format!(
                "beacons overlap at donor {}",
                pop.genotypes[shared].donor_id
            )));
        }
    }
    let mut taken: Vec<usize> = fixed1.iter().chain(&fixed2).flatten().copied().collect();
    let take = |fixed: Option<Vec<usize>>, size: usize, taken: &mut Vec<usize>| {
        fixed.unwrap_or_else(|| {
            let pick: Vec<usize> = order
                .iter()
                .copied()
                .filter(|i| !taken.contains(i))
                .take(size)
                .collect();
            taken.extend(&pick);
            pick
        })
    };
    let b1 = take(fixed1, config.b1_size, &mut taken);
    let b2 = take(fixed2, config.b2_size, &mut taken);
    let rest = order
        .into_iter()
        .filter(|i| !b1.contains(i) && !b2.contains(i))
        .collect();
    Ok(Beacons { b1, b2, rest })
}

/// One attacked cohort individual: the bins plus the oracle choices.
struct Inferred {
    result: ReconstructionResult,
    flips: FlipSet,
    correct: usize,
    wrong: usize,
    identified_correctly: bool,
    mismatch: Option<f64>,
}

fn infer(
    pop: &PopulationDataset,
    b1: &[usize],
    newcomers: &[usize],
    reference: &[usize],
    config: &ChainConfig,
    seed: u64,
) -> Result<Inferred> {
    let flips = update_flips(pop, b1, newcomers)?;
    // an attacker cannot split fewer flips into more bins
    let bins = config.m_prime.unwrap_or(config.m).min(flips.beta()).max(1);
    let result = if flips.is_empty() {
        ReconstructionResult {
            parameters: AttackParameters {
                attack: config.attack,
                m: Some(config.m),
                m_prime: bins,
                tau: None,
                seed,
            },
            bins: vec![Vec::new()],
        }
    } else {
        reconstruct(
            pop,
            reference,
            &flips,
            &AttackConfig::new(config.attack, bins),
            seed,
        )?
    };
    let victim_truth = truth_over(pop, newcomers[0], &flips.loci);
    let correct = oracle_bin(&result, &flips.loci, &victim_truth)?;
    let wrong = match newcomers.get(1) {
        Some(&other) => oracle_bin(&result, &flips.loci, &truth_over(pop, other, &flips.loci))?,
        None => correct,
    };
    let identified_correctly = match (config.identification, flips.is_empty()) {
        (IdentificationMode::Phenotype, false) if config.p.is_none() => {
            let ensemble = train_ensemble(pop, reference, &flips, &config.train)?;
            let profile = pop
                .phenotypes
                .as_ref()
                .map(|t| t.profile(&pop.genotypes[newcomers[0]].donor_id))
                .unwrap_or_default();
            match identify_victim(&result, &profile, &ensemble) {
                Ok(bin) => bin == correct,
                Err(ReconError::EmptyEnsemble | ReconError::NoUsableTrait) => true,
                Err(e) => return Err(e),
            }
        }
        _ => true,
    };
    let mismatch = precision_recall(&victim_truth, &result.bin_indicator(correct, &flips.loci))?
        .precision()
        .map(|p| 1.0 - p);
    Ok(Inferred {
        result,
        flips,
        correct,
        wrong,
        identified_correctly,
        mismatch,
    })
}

/// The genome used for querying: the first `round(p * len)` individuals get
/// their correctly identified bin, the rest another newcomer's bin.
fn mixed_genomes(inferred: &[Inferred], p: f64, mafs: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let correct_count = (p * inferred.len() as f64).round() as usize;
    inferred
        .iter()
        .enumerate()
        .map(|(i, inf)| {
            let bin = if i < correct_count {
                inf.correct
            } else {
                inf.wrong
            };
            inf.result.bins[bin].iter().map(|&l| (l, mafs[l])).collect()
        })
        .collect()
}

struct RepOutcome {
    power: Vec<f64>,
    p: f64,
    mismatch: f64,
    delta_eff: f64,
}

fn run_rep(pop: &PopulationDataset, config: &ChainConfig, rep: usize) -> Result<RepOutcome> {
    let seed = derive_seed(config.seed, rep as u64, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Beacons { b1, b2, mut rest } = choose_beacons(pop, config, &mut rng)?;
    let k = config.cohort_size;
    let alt_from_rest = matches!(config.alternate, AlternateCohort::NonMembers);
    let needed = k + if alt_from_rest { k } else { 0 } + (config.m - 1).max(1);
    if rest.len() <= needed {
        return Err(ReconError::Dataset(format!(
            "{} donors outside the beacons cannot supply cohorts, fillers and a reference",
            rest.len()
        )));
    }
    let null: Vec<usize> = rest.drain(..k).collect();
    let alternate: Vec<usize> = if alt_from_rest {
        rest.drain(..k).collect()
    } else {
        if b2.len() < k {
            return Err(ReconError::Dataset(format!(
                "target beacon has {} members, cohort needs {k}",
                b2.len()
            )));
        }
        b2.choose_multiple(&mut rng, k).copied().collect()
    };
    let fillers: Vec<usize> = rest.drain(..FILLER_POOL.min(rest.len() - 1)).collect();
    let reference = rest;

    let cohort_inputs: Vec<(usize, Vec<usize>, u64)> = null
        .iter()
        .chain(&alternate)
        .enumerate()
        .map(|(i, &v)| {
            let mut newcomers = vec![v];
            newcomers.extend(fillers.choose_multiple(&mut rng, config.m - 1));
            (v, newcomers, derive_seed(seed, 1, i as u64))
        })
        .collect();
    let inferred = cohort_inputs
        .iter()
        .map(|(_, newcomers, s)| infer(pop, &b1, newcomers, &reference, config, *s))
        .collect::<Result<Vec<_>>>()?;
    let (null_inf, alt_inf) = inferred.split_at(k);

    let p = config.p.unwrap_or_else(|| match config.identification {
        IdentificationMode::Oracle => 1.0,
        IdentificationMode::Phenotype => {
            alt_inf.iter().filter(|i| i.identified_correctly).count() as f64 / alt_inf.len() as f64
        }
    });
    if !(0.0..=1.0).contains(&p) {
        return Err(ReconError::InvalidArgument(format!(
            "identification accuracy {p} outside [0, 1]"
        )));
    }
    let mismatches: Vec<f64> = inferred.iter().filter_map(|i| i.mismatch).collect();
    let mismatch = mean(&mismatches).unwrap_or(0.0);
    let delta_eff = effective_delta(config.delta, mismatch);
    let lrt = LrtConfig {
        delta: delta_eff,
        beacon_size: b2.len(),
        alpha: config.alpha,
        null_cohort_size: k,
    };
    lrt.validate()?;
    let mafs = pop.mafs();
    let mut target = BeaconState::with_members(
        pop.num_snps(),
        b2.iter().map(|&i| pop.genotypes[i].clone()).collect(),
    )?;
    let null_traces = cohort_traces(
        &mixed_genomes(null_inf, p, &mafs),
        &mut target,
        &lrt,
        config.max_queries,
    )?;
    let thresholds = null_thresholds(&null_traces, config.alpha, config.max_queries)?;
    let alt_traces = cohort_traces(
        &mixed_genomes(alt_inf, p, &mafs),
        &mut target,
        &lrt,
        config.max_queries,
    )?;
    log::debug!(
        "rep {rep}: p={p:.3} mismatch={mismatch:.3} mean flips {:.1}",
        inferred.iter().map(|i| i.flips.beta() as f64).sum::<f64>() / inferred.len() as f64
    );
    Ok(RepOutcome {
        power: power_from_traces(&alt_traces, &thresholds)?,
        p,
        mismatch,
        delta_eff,
    })
}

/// Reconstructs cohort genomes from updates of the first beacon, calibrates
/// the statistic on non-members of the second beacon and measures power
/// against it, averaged over `reps` seeded repetitions.
pub fn run_chained_attack(pop: &PopulationDataset, config: &ChainConfig) -> Result<ChainOutcome> {
    if config.m == 0 || config.reps == 0 || config.max_queries == 0 {
        return Err(ReconError::InvalidArgument(
            "m, reps and max_queries must be at least 1".into(),
        ));
    }
    if config.cohort_size < 2 {
        return Err(ReconError::InvalidArgument(
            "cohorts need at least 2 individuals".into(),
        ));
    }
    let reps = (0..config.reps)
        .into_par_iter()
        .map(|r| run_rep(pop, config, r))
        .collect::<Result<Vec<_>>>()?;
    let per_rep: Vec<Vec<f64>> = reps.iter().map(|r| r.power.clone()).collect();
    let power = (0..config.max_queries)
        .map(|q| per_rep.iter().map(|p| p[q]).sum::<f64>() / per_rep.len() as f64)
        .collect();
    let avg = |f: fn(&RepOutcome) -> f64| reps.iter().map(f).sum::<f64>() / reps.len() as f64;
    let p = avg(|r| r.p);
    let delta_eff = avg(|r| r.delta_eff);
    Ok(ChainOutcome {
        curve: PowerCurve {
            power,
            m: config.m,
            p,
            alpha: config.alpha,
            delta: delta_eff,
        },
        per_rep,
        p,
        mismatch: avg(|r| r.mismatch),
        delta_eff,
    })
}

/// Donor ids separated by newlines, commas or whitespace; `#` starts a
/// comment that runs to the end of the line.
pub fn parse_id_list(text: &str) -> Vec<String> {
    text.lines()
        .flat_map(|l| {
            l.split('#')
                .next()
                .unwrap_or("")
                .split(|c: char| c == ',' || c.is_whitespace())
        })
        .filter(|id| !id.is_empty())
        .map(str::to_string)
        .collect()
}

/// Donor ids of `pop` by index, for callers that hold indices.
pub fn donor_ids(pop: &PopulationDataset, indices: &[usize]) -> Vec<String> {
    indices
        .iter()
        .map(|&i| pop.genotypes[i].donor_id.clone())
        .collect()
}
