use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};
use crate::genotype::PopulationDataset;

/// Binary trait values of one individual; a trait absent from the map is
/// unreported.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenotypeProfile {
    pub traits: BTreeMap<String, bool>,
}

impl PhenotypeProfile {
    pub fn get(&self, trait_name: &str) -> Option<bool> {
        self.traits.get(trait_name).copied()
    }

    pub fn with(mut self, trait_name: &str, value: bool) -> Self {
        self.traits.insert(trait_name.to_string(), value);
        self
    }
}

/// Reported phenotypes keyed by donor id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhenotypeTable {
    donors: BTreeMap<String, PhenotypeProfile>,
}

impl PhenotypeTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails on a second value for the same `(donor, trait)` pair.
    pub fn insert(&mut self, donor: &str, trait_name: &str, value: bool) -> Result<()> {
        let profile = self.donors.entry(donor.to_string()).or_default();
        if profile
            .traits
            .insert(trait_name.to_string(), value)
            .is_some()
        {
            return Err(ReconError::Dataset(format!(
                "trait {trait_name} reported twice for donor {donor}"
            )));
        }
        Ok(())
    }

    pub fn value(&self, donor: &str, trait_name: &str) -> Option<bool> {
        self.donors.get(donor).and_then(|p| p.get(trait_name))
    }

    /// Profile of `donor`; empty when nothing is reported.
    pub fn profile(&self, donor: &str) -> PhenotypeProfile {
        self.donors.get(donor).cloned().unwrap_or_default()
    }

    pub fn trait_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.donors.values().flat_map(|p| p.traits.keys()).collect();
        names.into_iter().cloned().collect()
    }

    pub fn donors(&self) -> impl Iterator<Item = &str> {
        self.donors.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.donors.values().all(|p| p.traits.is_empty())
    }

    /// Parses `donor_id<TAB>trait<TAB>value` lines with value 0 or 1. A
    /// leading `donor_id` header line and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || (i == 0 && line.starts_with("donor_id")) {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(ReconError::Parse {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let value = match fields[2].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(ReconError::Parse {
                        line: line_no,
                        message: format!("trait value {other:?} is not 0 or 1"),
                    })
                }
            };
            table
                .insert(fields[0], fields[1], value)
                .map_err(|e| ReconError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("donor_id\ttrait\tvalue\n");
        for (donor, profile) in &self.donors {
            for (name, &value) in &profile.traits {
                let _ = writeln!(out, "{donor}\t{name}\t{}", u8::from(value));
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

/// Traits equal to the minor-presence bit of one locus, for every donor of
/// `dataset`. Each entry is `(trait name, locus)`.
pub fn plant_traits(
    dataset: &PopulationDataset,
    traits: &[(String, usize)],
) -> Result<PhenotypeTable> {
    let mut table = PhenotypeTable::new();
    for (name, locus) in traits {
        if *locus >= dataset.num_snps() {
            return Err(ReconError::InvalidLocus {
                locus: *locus,
                panel_len: dataset.num_snps(),
            });
        }
        for g in &dataset.genotypes {
            table.insert(&g.donor_id, name, g.values[*locus].has_minor())?;
        }
    }
    Ok(table)
}
