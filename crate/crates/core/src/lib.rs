//! Simulation and attack toolkit for genomic beacons that answer yes/no
//! allele-presence queries and change membership over time.

pub mod attacks;
pub mod beacon;
pub mod correlation;
pub mod error;
pub mod experiment;
pub mod genotype;
pub mod membership;
pub mod numeric;
pub mod phenotype;
pub mod service;

pub use error::{ReconError, Result};
