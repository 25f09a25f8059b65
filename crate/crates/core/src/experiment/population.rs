use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};
use crate::genotype::{
    generate_synthetic_population, parse_genotype_matrix, PopulationDataset, SyntheticSpec,
};
use crate::phenotype::{plant_traits, PhenotypeTable};

/// Block-structured synthetic population. Block MAFs are log-spaced from
/// `maf_min` to `maf_max`, in panel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub donors: usize,
    pub blocks: usize,
    pub block_size: usize,
    pub maf_min: f64,
    pub maf_max: f64,
    pub agreement: f64,
    pub seed: u64,
    /// Traits planted on the first locus of evenly spaced blocks.
    pub traits: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            donors: 1000,
            blocks: 400,
            block_size: 5,
            maf_min: 0.002,
            maf_max: 0.3,
            agreement: 0.9,
            seed: 1,
            traits: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn block_mafs(&self) -> Vec<f64> {
        let b = self.blocks;
        if b == 1 {
            return vec![self.maf_min];
        }
        let (lo, hi) = (self.maf_min.ln(), self.maf_max.ln());
        (0..b)
            .map(|i| (lo + (hi - lo) * i as f64 / (b - 1) as f64).exp())
            .collect()
    }

    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            num_donors: self.donors,
            block_sizes: vec![self.block_size; self.blocks],
            per_block_maf: self.block_mafs(),
            within_block_agreement: self.agreement,
        }
    }

    /// `(trait name, locus)` pairs used for planting.
    pub fn trait_loci(&self) -> Vec<(String, usize)> {
        (0..self.traits.min(self.blocks))
            .map(|t| {
                let block = t * self.blocks / self.traits;
                (format!("trait{t}"), block * self.block_size)
            })
            .collect()
    }

    pub fn generate(&self) -> Result<PopulationDataset> {
        if self.blocks == 0 || self.block_size == 0 {
            return Err(ReconError::InvalidArgument(
                "synthetic population needs blocks of size >= 1".into(),
            ));
        }
        if !(self.maf_min > 0.0 && self.maf_min <= self.maf_max) {
            return Err(ReconError::InvalidArgument(format!(
                "maf range [{}, {}] must be positive and ordered",
                self.maf_min, self.maf_max
            )));
        }
        let data = generate_synthetic_population(&self.spec(), self.seed)?;
        if self.traits == 0 {
            return Ok(data);
        }
        let table = plant_traits(&data, &self.trait_loci())?;
        Ok(data.with_phenotypes(table))
    }
}

const SYNTHETIC_PREFIX: &str = "synthetic";

impl fmt::Display for SyntheticConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{SYNTHETIC_PREFIX}:donors={},blocks={},block_size={},maf_min={},maf_max={},agreement={},seed={},traits={}",
            self.donors, self.blocks, self.block_size, self.maf_min, self.maf_max, self.agreement, self.seed, self.traits
        )
    }
}

impl FromStr for SyntheticConfig {
    type Err = ReconError;

    /// `synthetic` or `synthetic:key=value,...`; unset keys keep defaults.
    fn from_str(s: &str) -> Result<Self> {
        let rest = s
            .strip_prefix(SYNTHETIC_PREFIX)
            .ok_or_else(|| ReconError::InvalidArgument(format!("{s:?} is not a synthetic spec")))?;
        let mut c = SyntheticConfig::default();
        let body = match rest {
            "" => return Ok(c),
            r => r.strip_prefix(':').ok_or_else(|| {
                ReconError::InvalidArgument(format!("{s:?} is not a synthetic spec"))
            })?,
        };
        for pair in body.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                ReconError::InvalidArgument(format!("expected key=value, got {pair:?}"))
            })?;
            let bad = |e: &dyn fmt::Display| ReconError::InvalidArgument(format!("{key}: {e}"));
            let value = value.trim();
            match key.trim() {
                "donors" => c.donors = value.parse().map_err(|e| bad(&e))?,
                "blocks" => c.blocks = value.parse().map_err(|e| bad(&e))?,
                "block_size" => c.block_size = value.parse().map_err(|e| bad(&e))?,
                "maf_min" => c.maf_min = value.parse().map_err(|e| bad(&e))?,
                "maf_max" => c.maf_max = value.parse().map_err(|e| bad(&e))?,
                "agreement" => c.agreement = value.parse().map_err(|e| bad(&e))?,
                "seed" => c.seed = value.parse().map_err(|e| bad(&e))?,
                "traits" => c.traits = value.parse().map_err(|e| bad(&e))?,
                other => {
                    return Err(ReconError::InvalidArgument(format!(
                        "unknown synthetic key {other:?}"
                    )))
                }
            }
        }
        Ok(c)
    }
}

/// Where a population comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationSource {
    Synthetic(SyntheticConfig),
    File {
        matrix: PathBuf,
        maf: Option<PathBuf>,
        phenotypes: Option<PathBuf>,
    },
}

impl Default for PopulationSource {
    fn default() -> Self {
        PopulationSource::Synthetic(SyntheticConfig::default())
    }
}

impl FromStr for PopulationSource {
    type Err = ReconError;

    /// A synthetic spec, or a matrix path whose `.maf` and `.pheno.tsv`
    /// siblings are picked up when present.
    fn from_str(s: &str) -> Result<Self> {
        if s.starts_with(SYNTHETIC_PREFIX) && !Path::new(s).exists() {
            return s.parse().map(PopulationSource::Synthetic);
        }
        let matrix = PathBuf::from(s);
        let sibling = |suffix: &str| {
            let mut p = matrix.clone().into_os_string();
            p.push(suffix);
            let p = PathBuf::from(p);
            p.exists().then_some(p)
        };
        Ok(PopulationSource::File {
            maf: sibling(".maf"),
            phenotypes: sibling(".pheno.tsv"),
            matrix,
        })
    }
}

impl PopulationSource {
    pub fn load(&self) -> Result<PopulationDataset> {
        match self {
            PopulationSource::Synthetic(c) => c.generate(),
            PopulationSource::File {
                matrix,
                maf,
                phenotypes,
            } => {
                let text = BufReader::new(File::open(matrix)?);
                let sidecar = maf
                    .as_ref()
                    .map(File::open)
                    .transpose()?
                    .map(BufReader::new);
                let data = parse_genotype_matrix(text, sidecar)?;
                Ok(match phenotypes {
                    Some(p) => data.with_phenotypes(PhenotypeTable::read(p)?),
                    None => data,
                })
            }
        }
    }
}
