//! Shared benchmark fixture: one update on the default synthetic population.

use recon_core::attacks::{run_attack, AttackConfig, AttackKind, ReconstructionResult};
use recon_core::beacon::{BeaconState, FlipSet};
use recon_core::correlation::{build_correlation_model, CorrelationModel};
use recon_core::experiment::{update_flips, PopulationSource};
use recon_core::genotype::PopulationDataset;
use recon_core::Result;

pub const MEMBERS: usize = 50;
pub const NEWCOMERS: usize = 3;

pub struct Fixture {
    pub population: PopulationDataset,
    pub reference: PopulationDataset,
    pub flips: FlipSet,
    pub model: CorrelationModel,
    pub mafs: Vec<f64>,
}

impl Fixture {
    /// Members are the first donors, then the newcomers; the rest is the
    /// reference.
    pub fn new(spec: &str) -> Result<Self> {
        let population = spec.parse::<PopulationSource>()?.load()?;
        let members: Vec<usize> = (0..MEMBERS).collect();
        let newcomers: Vec<usize> = (MEMBERS..MEMBERS + NEWCOMERS).collect();
        let reference_ids: Vec<usize> = (MEMBERS + NEWCOMERS..population.num_donors()).collect();
        let flips = update_flips(&population, &members, &newcomers)?;
        let reference = population.select_donors(&reference_ids);
        let model = build_correlation_model(&reference, &flips.loci)?;
        let mafs = population.mafs();
        Ok(Self {
            population,
            reference,
            flips,
            model,
            mafs,
        })
    }

    pub fn attack(&self, kind: AttackKind) -> Result<ReconstructionResult> {
        run_attack(
            &AttackConfig::new(kind, NEWCOMERS),
            &self.flips,
            Some(&self.model),
            &self.mafs,
            0,
        )
    }

    /// The beacon after the update.
    pub fn beacon(&self) -> Result<BeaconState> {
        BeaconState::with_members(
            self.population.num_snps(),
            self.population.genotypes[..MEMBERS + NEWCOMERS].to_vec(),
        )
    }
}
