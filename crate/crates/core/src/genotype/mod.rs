//! Genotype data model: SNP panels, per-donor calls, minor-presence bits and
//! minor allele frequencies.
//!
//! Missing calls count as homozygous major wherever a presence bit is needed
//! (beacon answers, reconstruction truth) and are left out of MAF
//! denominators.

mod io;
mod synthetic;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};
use crate::phenotype::PhenotypeTable;

pub use io::{parse_genotype_matrix, write_genotype_matrix, write_maf_sidecar};
pub use synthetic::{generate_synthetic_population, DonorSampler, SyntheticSpec};

/// One SNP of an ordered panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnpDef {
    pub id: String,
    pub chromosome: String,
    pub position: u64,
    /// Minor allele frequency, always folded into `[0, 0.5]`.
    pub maf: f64,
}

/// A single genotype call: the number of minor alleles, or missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Call {
    HomMajor,
    Het,
    HomMinor,
    Missing,
}

impl Call {
    pub fn from_dosage(dosage: u8) -> Option<Call> {
        match dosage {
            0 => Some(Call::HomMajor),
            1 => Some(Call::Het),
            2 => Some(Call::HomMinor),
            _ => None,
        }
    }

    pub fn dosage(self) -> Option<u8> {
        match self {
            Call::HomMajor => Some(0),
            Call::Het => Some(1),
            Call::HomMinor => Some(2),
            Call::Missing => None,
        }
    }

    /// Whether the call carries at least one minor allele. Missing is `false`.
    #[inline]
    pub fn has_minor(self) -> bool {
        matches!(self, Call::Het | Call::HomMinor)
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dosage() {
            Some(d) => write!(f, "{d}"),
            None => f.write_str("NA"),
        }
    }
}

/// A donor's calls aligned to a SNP panel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genotype {
    pub donor_id: String,
    pub values: Vec<Call>,
}

impl Genotype {
    pub fn new(donor_id: impl Into<String>, values: Vec<Call>) -> Self {
        Self {
            donor_id: donor_id.into(),
            values,
        }
    }

    /// Builds a genotype from dosages (`0`, `1`, `2`; anything else is missing).
    pub fn from_dosages(donor_id: impl Into<String>, dosages: &[u8]) -> Self {
        let values = dosages
            .iter()
            .map(|&d| Call::from_dosage(d).unwrap_or(Call::Missing))
            .collect();
        Self::new(donor_id, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn minor_presence(&self) -> MinorPresenceVector {
        minor_presence(self)
    }

    /// Loci at which the donor carries a minor allele.
    pub fn minor_loci(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.has_minor().then_some(j))
            .collect()
    }
}

/// Per-locus "has at least one minor allele" bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MinorPresenceVector {
    pub bits: Vec<bool>,
}

impl MinorPresenceVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_u8(bits: &[u8]) -> Self {
        Self::new(bits.iter().map(|&b| b != 0).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Maps a genotype to its minor-presence bits; missing maps to 0.
pub fn minor_presence(genotype: &Genotype) -> MinorPresenceVector {
    MinorPresenceVector::new(genotype.values.iter().map(|c| c.has_minor()).collect())
}

/// Folds an allele frequency so the minor allele is always the rarer one.
pub fn fold_maf(freq: f64) -> f64 {
    if freq > 0.5 {
        1.0 - freq
    } else {
        freq
    }
}

/// A panel plus the genotypes of every donor, aligned to it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PopulationDataset {
    pub panel: Vec<SnpDef>,
    pub genotypes: Vec<Genotype>,
    pub phenotypes: Option<PhenotypeTable>,
}

impl PopulationDataset {
    /// Validates alignment and donor-id uniqueness.
    pub fn new(panel: Vec<SnpDef>, genotypes: Vec<Genotype>) -> Result<Self> {
        let dataset = Self {
            panel,
            genotypes,
            phenotypes: None,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn with_phenotypes(mut self, phenotypes: PhenotypeTable) -> Self {
        self.phenotypes = Some(phenotypes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.panel.len());
        for snp in &self.panel {
            if !(0.0..=0.5).contains(&snp.maf) {
                return Err(ReconError::Dataset(format!(
                    "snp {} has maf {} outside [0, 0.5]",
                    snp.id, snp.maf
                )));
            }
            if !ids.insert(snp.id.as_str()) {
                return Err(ReconError::Dataset(format!("duplicate snp id {}", snp.id)));
            }
        }
        let mut donors = HashSet::with_capacity(self.genotypes.len());
        for g in &self.genotypes {
            if g.values.len() != self.panel.len() {
                return Err(ReconError::Dataset(format!(
                    "donor {} has {} calls for a panel of {} snps",
                    g.donor_id,
                    g.values.len(),
                    self.panel.len()
                )));
            }
            if !donors.insert(g.donor_id.as_str()) {
                return Err(ReconError::Dataset(format!(
                    "duplicate donor id {}",
                    g.donor_id
                )));
            }
        }
        Ok(())
    }

    pub fn num_donors(&self) -> usize {
        self.genotypes.len()
    }

    pub fn num_snps(&self) -> usize {
        self.panel.len()
    }

    pub fn mafs(&self) -> Vec<f64> {
        self.panel.iter().map(|s| s.maf).collect()
    }

    pub fn donor(&self, id: &str) -> Option<&Genotype> {
        self.genotypes.iter().find(|g| g.donor_id == id)
    }

    pub fn donor_index(&self) -> HashMap<&str, usize> {
        self.genotypes
            .iter()
            .enumerate()
            .map(|(i, g)| (g.donor_id.as_str(), i))
            .collect()
    }

    /// Minor-presence bits of column `j` across donors.
    pub fn presence_column(&self, j: usize) -> Vec<bool> {
        self.genotypes
            .iter()
            .map(|g| g.values[j].has_minor())
            .collect()
    }

    /// A dataset restricted to the donors at `indices`, sharing the panel.
    pub fn select_donors(&self, indices: &[usize]) -> PopulationDataset {
        PopulationDataset {
            panel: self.panel.clone(),
            genotypes: indices.iter().map(|&i| self.genotypes[i].clone()).collect(),
            phenotypes: self.phenotypes.clone(),
        }
    }

    /// Recomputes every panel MAF from the genotype matrix. Columns with no
    /// observed call get MAF 0.
    pub fn recompute_mafs(&mut self) {
        for j in 0..self.panel.len() {
            self.panel[j].maf = compute_maf(self, j).unwrap_or(0.0);
        }
    }
}

/// Minor allele frequency of column `snp_index`, folded to at most 0.5.
pub fn compute_maf(dataset: &PopulationDataset, snp_index: usize) -> Result<f64> {
    if snp_index >= dataset.num_snps() {
        return Err(ReconError::InvalidLocus {
            locus: snp_index,
            panel_len: dataset.num_snps(),
        });
    }
    let (alleles, observed) = dataset
        .genotypes
        .iter()
        .filter_map(|g| g.values[snp_index].dosage())
        .fold((0u64, 0u64), |(c, n), d| (c + u64::from(d), n + 1));
    if observed == 0 {
        return Err(ReconError::AllMissing(snp_index));
    }
    Ok(fold_maf(alleles as f64 / (2 * observed) as f64))
}

/// Sort key giving natural chromosome order: numeric names first, by value.
pub(crate) fn chromosome_key(chrom: &str) -> (u8, u64, String) {
    let trimmed = chrom.strip_prefix("chr").unwrap_or(chrom);
    match trimmed.parse::<u64>() {
        Ok(n) => (0, n, String::new()),
        Err(_) => (1, 0, trimmed.to_string()),
    }
}
