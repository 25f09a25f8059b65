use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::cv::{macro_f1, stratified_folds};
use super::forest::{ForestConfig, RandomForest};
use super::smote::smote_oversample;
use super::table::PhenotypeProfile;
use crate::attacks::ReconstructionResult;
use crate::error::{ReconError, Result};
use crate::genotype::PopulationDataset;
use crate::numeric::{mean, sample_sd};

/// Macro-F1 of a balanced random guess.
pub const CHANCE_F1: f64 = 0.5;

/// How the cross-validated F1 scores decide whether a model is kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum GateRule {
    /// Keep when the mean fold F1 exceeds chance.
    MeanAboveChance,
    /// Keep when the mean fold F1 exceeds chance by more than a one-sided
    /// Student-t margin at `confidence`, using `sd / sqrt(folds)` as the
    /// standard error.
    Significant { confidence: f64 },
}

impl Default for GateRule {
    fn default() -> Self {
        GateRule::Significant { confidence: 0.95 }
    }
}

impl GateRule {
    pub fn retains(self, fold_f1: &[f64], folds: usize) -> bool {
        let Some(m) = mean(fold_f1) else {
            return false;
        };
        match self {
            GateRule::MeanAboveChance => m > CHANCE_F1,
            GateRule::Significant { confidence } => {
                let df = folds.saturating_sub(1).max(1) as f64;
                let t = StudentsT::new(0.0, 1.0, df)
                    .expect("positive degrees of freedom")
                    .inverse_cdf(confidence);
                let se = sample_sd(fold_f1) / (folds as f64).sqrt();
                m - CHANCE_F1 > t * se
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub folds: usize,
    pub repeats: usize,
    pub smote_k: usize,
    pub seed: u64,
    pub forest: ForestConfig,
    pub gate: GateRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            repeats: 3,
            smote_k: 5,
            seed: 0,
            forest: ForestConfig::default(),
            gate: GateRule::default(),
        }
    }
}

/// A per-trait classifier over minor-presence bits at `feature_loci`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitModel {
    pub trait_name: String,
    pub feature_loci: Vec<usize>,
    pub forest: RandomForest,
    pub fold_f1: Vec<f64>,
    /// Mean of `fold_f1`.
    pub cv_f1: f64,
    pub retained: bool,
}

impl TraitModel {
    /// Probability that a genome whose minor-presence loci are `bin` (sorted)
    /// reports the trait as 1.
    pub fn probability_present(&self, bin: &[usize]) -> f64 {
        let x: Vec<f64> = self
            .feature_loci
            .iter()
            .map(|l| f64::from(u8::from(bin.binary_search(l).is_ok())))
            .collect();
        self.forest.predict_proba(&x)
    }

    pub fn probability_of(&self, bin: &[usize], value: bool) -> f64 {
        let p = self.probability_present(bin);
        if value {
            p
        } else {
            1.0 - p
        }
    }
}

fn fit_balanced(
    x: &[Vec<f64>],
    y: &[bool],
    config: &TrainConfig,
    seed: u64,
) -> Result<RandomForest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (bx, by) = smote_oversample(x, y, config.smote_k, rng.gen())?;
    RandomForest::fit(&bx, &by, &config.forest, rng.gen())
}

/// Trains one trait model on the donors of `training` that report the trait.
///
/// Validation is repeated stratified k-fold; SMOTE is applied to each
/// training fold only. The final forest is fitted on all reporting donors.
pub fn train_trait_model(
    training: &PopulationDataset,
    trait_name: &str,
    feature_loci: &[usize],
    config: &TrainConfig,
) -> Result<TraitModel> {
    let table = training
        .phenotypes
        .as_ref()
        .ok_or_else(|| ReconError::Dataset("training population has no phenotypes".into()))?;
    if let Some(&bad) = feature_loci.iter().find(|&&l| l >= training.num_snps()) {
        return Err(ReconError::InvalidLocus {
            locus: bad,
            panel_len: training.num_snps(),
        });
    }
    if config.folds < 2 || config.repeats == 0 {
        return Err(ReconError::InvalidArgument(
            "need at least 2 folds and 1 repeat".into(),
        ));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for g in &training.genotypes {
        if let Some(value) = table.value(&g.donor_id, trait_name) {
            x.push(
                feature_loci
                    .iter()
                    .map(|&l| f64::from(u8::from(g.values[l].has_minor())))
                    .collect::<Vec<f64>>(),
            );
            y.push(value);
        }
    }
    let positives = y.iter().filter(|&&v| v).count();
    let negatives = y.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(ReconError::DegenerateTrait(trait_name.to_string()));
    }
    if positives < 2 || negatives < 2 {
        return Err(ReconError::TooFewSamples {
            trait_name: trait_name.to_string(),
            message: format!(
                "{positives} positive and {negatives} negative donors; need 2 of each"
            ),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut fold_f1 = Vec::with_capacity(config.folds * config.repeats);
    for _ in 0..config.repeats {
        let folds = stratified_folds(&y, config.folds, &mut rng);
        for f in 0..config.folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..y.len() {
                if folds[i] == f {
                    vx.push(x[i].clone());
                    vy.push(y[i]);
                } else {
                    tx.push(x[i].clone());
                    ty.push(y[i]);
                }
            }
            let fold_seed = rng.gen();
            if vy.is_empty() {
                continue;
            }
            let forest = fit_balanced(&tx, &ty, config, fold_seed)?;
            let predicted: Vec<bool> = vx.iter().map(|r| forest.predict(r)).collect();
            fold_f1.push(macro_f1(&vy, &predicted));
        }
    }
    let forest = fit_balanced(&x, &y, config, rng.gen())?;
    let cv_f1 = mean(&fold_f1).unwrap_or(0.0);
    let retained = config.gate.retains(&fold_f1, config.folds);
    Ok(TraitModel {
        trait_name: trait_name.to_string(),
        feature_loci: feature_loci.to_vec(),
        forest,
        fold_f1,
        cv_f1,
        retained,
    })
}

/// The retained trait models.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleClassifier {
    models: Vec<TraitModel>,
}

impl EnsembleClassifier {
    /// Keeps only the retained models.
    pub fn from_models(models: impl IntoIterator<Item = TraitModel>) -> Self {
        Self {
            models: models.into_iter().filter(|m| m.retained).collect(),
        }
    }

    pub fn models(&self) -> &[TraitModel] {
        &self.models
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Sum over retained models whose trait the profile reports of the predicted
/// probability of the reported value.
pub fn ensemble_score(
    ensemble: &EnsembleClassifier,
    bin: &[usize],
    profile: &PhenotypeProfile,
) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(ReconError::EmptyEnsemble);
    }
    let mut score = 0.0;
    let mut used = 0;
    for model in ensemble.models() {
        if let Some(value) = profile.get(&model.trait_name) {
            score += model.probability_of(bin, value);
            used += 1;
        }
    }
    if used == 0 {
        return Err(ReconError::NoUsableTrait);
    }
    Ok(score)
}

/// Index of the highest-scoring bin; ties go to the lowest index.
pub fn identify_victim(
    bins: &ReconstructionResult,
    profile: &PhenotypeProfile,
    ensemble: &EnsembleClassifier,
) -> Result<usize> {
    if bins.bins.is_empty() {
        return Err(ReconError::InvalidArgument(
            "no bins to match against".into(),
        ));
    }
    let scores = bins
        .bins
        .iter()
        .map(|b| ensemble_score(ensemble, b, profile))
        .collect::<Result<Vec<f64>>>()?;
    Ok(argmax_lowest(&scores))
}

pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
