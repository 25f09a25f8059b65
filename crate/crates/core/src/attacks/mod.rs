//! Genome-reconstruction attacks on a no-to-yes flip set.
//!
//! Every attack partitions (or, for fuzzy clustering, covers) the flip loci
//! into `m'` bins; each bin is one candidate genome whose inferred
//! minor-presence loci are the bin's contents.

mod baseline;
mod fuzzy;
mod graph;
mod greedy;
mod kmeans;
mod spectral;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beacon::FlipSet;
use crate::correlation::CorrelationModel;
use crate::error::{ReconError, Result};

pub use baseline::{baseline_reconstruct, presence_probability};
pub use fuzzy::{fuzzy_c_means, fuzzy_reconstruct, FuzzyOptions, FuzzyResult};
pub use graph::{build_snp_graph, build_snp_graph_with, Edge, GraphOptions, SnpGraph};
pub use greedy::{greedy_reconstruct, GreedyMode, GreedyOptions};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};
pub use spectral::{spectral_embedding, spectral_reconstruct, spectral_reconstruct_with};

/// Rare-SNP threshold used by the greedy attack unless configured.
pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Baseline,
    Greedy,
    Spectral,
    Fuzzy,
}

impl AttackKind {
    pub fn needs_model(self) -> bool {
        !matches!(self, AttackKind::Baseline)
    }

    /// Whether every flip locus lands in exactly one bin. Baseline bins draw
    /// each locus independently and fuzzy bins may share loci.
    pub fn partitions(self) -> bool {
        matches!(self, AttackKind::Greedy | AttackKind::Spectral)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Baseline => "baseline",
            AttackKind::Greedy => "greedy",
            AttackKind::Spectral => "spectral",
            AttackKind::Fuzzy => "fuzzy",
        })
    }
}

impl FromStr for AttackKind {
    type Err = ReconError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(AttackKind::Baseline),
            "greedy" => Ok(AttackKind::Greedy),
            "spectral" => Ok(AttackKind::Spectral),
            "fuzzy" => Ok(AttackKind::Fuzzy),
            other => Err(ReconError::InvalidArgument(format!(
                "unknown attack {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackParameters {
    pub attack: AttackKind,
    /// Number of newcomers, when the caller knows it.
    pub m: Option<usize>,
    pub m_prime: usize,
    pub tau: Option<f64>,
    pub seed: u64,
}

/// `m'` candidate genomes, each a sorted list of inferred minor-allele loci.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub parameters: AttackParameters,
    pub bins: Vec<Vec<usize>>,
}

impl ReconstructionResult {
    pub(crate) fn new(parameters: AttackParameters, bins: Vec<Vec<usize>>) -> Self {
        let bins = bins
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        Self { parameters, bins }
    }

    pub fn with_newcomers(mut self, m: usize) -> Self {
        self.parameters.m = Some(m);
        self
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    /// Whether the union of the bins equals `flips`.
    pub fn covers(&self, flips: &FlipSet) -> bool {
        let union: BTreeSet<usize> = self.bins.iter().flatten().copied().collect();
        union.into_iter().eq(flips.loci.iter().copied())
    }

    pub fn is_disjoint(&self) -> bool {
        let total: usize = self.bins.iter().map(Vec::len).sum();
        let union: BTreeSet<usize> = self.bins.iter().flatten().copied().collect();
        total == union.len()
    }

    /// Membership of `bin` over `universe` (typically the flip loci).
    pub fn bin_indicator(&self, bin: usize, universe: &[usize]) -> Vec<bool> {
        let b = &self.bins[bin];
        universe
            .iter()
            .map(|l| b.binary_search(l).is_ok())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Everything needed to run one attack kind.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub m_prime: usize,
    pub tau: f64,
    pub greedy_mode: GreedyMode,
    pub graph: GraphOptions,
    pub kmeans: KMeansOptions,
    pub fuzzy: FuzzyOptions,
}

impl AttackConfig {
    pub fn new(kind: AttackKind, m_prime: usize) -> Self {
        Self {
            kind,
            m_prime,
            tau: DEFAULT_TAU,
            greedy_mode: GreedyMode::Argmax,
            graph: GraphOptions::default(),
            kmeans: KMeansOptions::default(),
            fuzzy: FuzzyOptions::default(),
        }
    }
}

/// Runs the configured attack. `mafs` is indexed by panel locus; `model` is
/// required by every attack except the baseline.
pub fn run_attack(
    config: &AttackConfig,
    flips: &FlipSet,
    model: Option<&CorrelationModel>,
    mafs: &[f64],
    seed: u64,
) -> Result<ReconstructionResult> {
    let need_model = || {
        model.ok_or_else(|| {
            ReconError::InvalidArgument(format!("{} attack needs a correlation model", config.kind))
        })
    };
    match config.kind {
        AttackKind::Baseline => baseline_reconstruct(flips, mafs, config.m_prime, seed),
        AttackKind::Greedy => greedy_reconstruct(
            flips,
            need_model()?,
            mafs,
            &GreedyOptions {
                tau: config.tau,
                m_prime: config.m_prime,
                mode: config.greedy_mode,
                seed,
            },
        ),
        AttackKind::Spectral => {
            let graph = build_snp_graph_with(flips, need_model()?, &config.graph)?;
            spectral_reconstruct_with(&graph, config.m_prime, &config.kmeans, seed)
        }
        AttackKind::Fuzzy => {
            let graph = build_snp_graph_with(flips, need_model()?, &config.graph)?;
            fuzzy_reconstruct(&graph, config.m_prime, &config.fuzzy, seed)
        }
    }
}

pub(crate) fn check_m_prime(m_prime: usize) -> Result<()> {
    if m_prime == 0 {
        return Err(ReconError::InvalidArgument("m' must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn maf_of(mafs: &[f64], locus: usize) -> Result<f64> {
    match mafs.get(locus) {
        Some(&f) if f.is_finite() => Ok(f),
        _ => Err(ReconError::MissingMaf(locus)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beacon::FlipDirection;

    #[test]
    fn json_shape() {
        let r = ReconstructionResult::new(
            AttackParameters {
                attack: AttackKind::Spectral,
                m: Some(2),
                m_prime: 2,
                tau: None,
                seed: 7,
            },
            vec![vec![3, 1], vec![2]],
        );
        let json = r.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["bins"], serde_json::json!([[1, 3], [2]]));
        assert_eq!(v["parameters"]["attack"], "spectral");
        assert_eq!(ReconstructionResult::from_json(&json).unwrap(), r);
        let flips = FlipSet {
            direction: FlipDirection::NoToYes,
            loci: vec![1, 2, 3],
        };
        assert!(r.covers(&flips));
        assert!(r.is_disjoint());
        assert_eq!(r.bin_indicator(0, &flips.loci), vec![true, false, true]);
    }

    #[test]
    fn attack_kind_parsing() {
        for k in [
            AttackKind::Baseline,
            AttackKind::Greedy,
            AttackKind::Spectral,
            AttackKind::Fuzzy,
        ] {
            assert_eq!(k.to_string().parse::<AttackKind>().unwrap(), k);
        }
        assert!("kmeans".parse::<AttackKind>().is_err());
    }
}
