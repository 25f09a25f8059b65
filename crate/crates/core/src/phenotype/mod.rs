//! Victim identification by matching reported binary traits against the
//! reconstructed genomes.

mod bundle;
mod cv;
mod forest;
mod model;
mod smote;
mod table;

pub use bundle::{load_bundle, save_bundle, BundleManifest, ManifestEntry};
pub use cv::{macro_f1, stratified_folds};
pub use forest::{ForestConfig, RandomForest};
pub use model::{
    ensemble_score, identify_victim, train_trait_model, EnsembleClassifier, GateRule, TrainConfig,
    TraitModel, CHANCE_F1,
};
pub use smote::smote_oversample;
pub use table::{plant_traits, PhenotypeProfile, PhenotypeTable};
