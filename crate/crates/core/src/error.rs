use std::io;

use thiserror::Error;

pub type Result<T, E = ReconError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: invalid genotype value {token:?}")]
    InvalidGenotype { line: usize, token: String },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("snp column {0} has no observed genotypes")]
    AllMissing(usize),

    #[error("locus {locus} out of range for a panel of {panel_len} snps")]
    InvalidLocus { locus: usize, panel_len: usize },

    #[error("invalid beacon update: {0}")]
    Update(String),

    #[error("snapshots cover different panels ({0} vs {1} loci)")]
    PanelMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("locus {0} has no minor allele frequency")]
    MissingMaf(usize),

    #[error("locus {0} is not covered by the correlation model")]
    LocusNotInModel(usize),

    #[error("reference population overlaps target donors: {0}")]
    ReferenceOverlap(String),

    #[error("degenerate trait {0:?}: labels are constant")]
    DegenerateTrait(String),

    #[error("trait {trait_name:?}: {message}")]
    TooFewSamples { trait_name: String, message: String },

    #[error("no usable trait: profile reports no trait covered by the ensemble")]
    NoUsableTrait,

    #[error("ensemble contains no retained trait models")]
    EmptyEnsemble,

    #[error("protocol error: {code}: {message}")]
    Protocol { code: String, message: String },

    #[error("transport error after {attempts} attempt(s): {source}")]
    Transport {
        attempts: usize,
        #[source]
        source: io::Error,
    },

    #[error("torn snapshot: beacon version changed from {before} to {after} during scan")]
    TornSnapshot { before: u64, after: u64 },

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
