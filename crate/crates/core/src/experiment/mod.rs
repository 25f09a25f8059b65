//! Seeded experiment drivers: reconstruction sweeps, the chained
//! membership attack, per-donor risk and planted-structure scenarios.

mod chain;
mod metrics;
mod planted;
mod population;
mod risk;
mod sweep;
mod update;

pub use chain::{
    donor_ids, parse_id_list, run_chained_attack, AlternateCohort, ChainConfig, ChainOutcome,
};
pub use metrics::{oracle_bin, precision_recall, risk_percentile, Confusion};
pub use planted::{planted_instance, PlantedConfig, PlantedInstance};
pub use population::{PopulationSource, SyntheticConfig};
pub use risk::{quantify_risk, RiskReport, RiskSetup};
pub use sweep::{
    rows_to_csv, run_sweep, run_trial, summarize, summary_to_csv, ExperimentConfig, MetricsRow,
    Sweep, SweepAxis, SweepPoint,
};
pub use update::{
    derive_seed, draw_attackable, identify, reconstruct, train_ensemble, truth_over, update_flips,
    IdentificationMode, Identified, UpdateDraw, MAX_DRAWS,
};
