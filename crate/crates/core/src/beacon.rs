//! Dynamic beacon: honest per-locus "any member carries a minor allele"
//! answers over a versioned member set, full snapshots, and flip sets between
//! two snapshots.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};
use crate::genotype::Genotype;

/// Anything that can answer presence queries by panel index.
pub trait BeaconQuery {
    fn query_locus(&mut self, locus: usize) -> Result<bool>;
}

/// Counts recorded by the most recent update; an observer learns these from
/// beacon metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub from_version: u64,
    pub to_version: u64,
    pub added: usize,
    pub removed: usize,
}

#[derive(Debug, Clone)]
pub struct BeaconState {
    panel_len: usize,
    members: Vec<Genotype>,
    /// Number of members carrying a minor allele at each locus.
    carriers: Vec<u32>,
    version: u64,
    last_update: Option<UpdateRecord>,
}

impl BeaconState {
    pub fn empty(panel_len: usize) -> Self {
        Self {
            panel_len,
            members: Vec::new(),
            carriers: vec![0; panel_len],
            version: 0,
            last_update: None,
        }
    }

    /// A version-0 beacon holding `members`.
    pub fn with_members(panel_len: usize, members: Vec<Genotype>) -> Result<Self> {
        let mut state = Self::empty(panel_len);
        state.insert_members(members)?;
        Ok(state)
    }

    pub fn panel_len(&self) -> usize {
        self.panel_len
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn members(&self) -> &[Genotype] {
        &self.members
    }

    pub fn last_update(&self) -> Option<UpdateRecord> {
        self.last_update
    }

    pub fn contains(&self, donor_id: &str) -> bool {
        self.members.iter().any(|g| g.donor_id == donor_id)
    }

    pub fn query(&self, locus: usize) -> Result<bool> {
        self.carriers
            .get(locus)
            .map(|&c| c > 0)
            .ok_or(ReconError::InvalidLocus {
                locus,
                panel_len: self.panel_len,
            })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            version: self.version,
            answers: self.carriers.iter().map(|&c| c > 0).collect(),
            member_count: self.members.len(),
        }
    }

    /// Returns the next version with `add` joined and `remove` gone.
    pub fn update(&self, add: Vec<Genotype>, remove: &[&str]) -> Result<BeaconState> {
        let mut next = self.clone();
        next.apply_update(add, remove)?;
        Ok(next)
    }

    /// In-place form of [`BeaconState::update`]; the state is untouched on error.
    pub fn apply_update(&mut self, add: Vec<Genotype>, remove: &[&str]) -> Result<()> {
        let current: HashSet<&str> = self.members.iter().map(|g| g.donor_id.as_str()).collect();
        let mut removing = HashSet::new();
        let mut adding = HashSet::new();
        for id in remove {
            if !current.contains(id) {
                return Err(ReconError::Update(format!("donor {id} is not a member")));
            }
            if !removing.insert(*id) {
                return Err(ReconError::Update(format!("donor {id} removed twice")));
            }
        }
        for g in &add {
            if g.values.len() != self.panel_len {
                return Err(ReconError::Update(format!(
                    "donor {} has {} calls for a panel of {}",
                    g.donor_id,
                    g.values.len(),
                    self.panel_len
                )));
            }
            let id = g.donor_id.as_str();
            if !adding.insert(id) || (current.contains(id) && !removing.contains(id)) {
                return Err(ReconError::Update(format!(
                    "donor {} is already a member",
                    g.donor_id
                )));
            }
        }
        let removing: HashSet<String> = removing.into_iter().map(str::to_string).collect();

        let (gone, kept): (Vec<Genotype>, Vec<Genotype>) = std::mem::take(&mut self.members)
            .into_iter()
            .partition(|g| removing.contains(&g.donor_id));
        self.members = kept;
        for g in &gone {
            for (c, call) in self.carriers.iter_mut().zip(&g.values) {
                if call.has_minor() {
                    *c -= 1;
                }
            }
        }
        let added = add.len();
        for g in &add {
            for (c, call) in self.carriers.iter_mut().zip(&g.values) {
                if call.has_minor() {
                    *c += 1;
                }
            }
        }
        self.members.extend(add);
        self.last_update = Some(UpdateRecord {
            from_version: self.version,
            to_version: self.version + 1,
            added,
            removed: gone.len(),
        });
        self.version += 1;
        Ok(())
    }

    /// Hash of the version and full member content.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.version.hash(&mut h);
        self.panel_len.hash(&mut h);
        self.members.hash(&mut h);
        h.finish()
    }

    fn insert_members(&mut self, members: Vec<Genotype>) -> Result<()> {
        let mut ids = HashSet::new();
        for g in &members {
            if g.values.len() != self.panel_len {
                return Err(ReconError::Update(format!(
                    "donor {} has {} calls for a panel of {}",
                    g.donor_id,
                    g.values.len(),
                    self.panel_len
                )));
            }
            if !ids.insert(g.donor_id.as_str()) {
                return Err(ReconError::Update(format!(
                    "duplicate donor {}",
                    g.donor_id
                )));
            }
        }
        for g in &members {
            for (c, call) in self.carriers.iter_mut().zip(&g.values) {
                if call.has_minor() {
                    *c += 1;
                }
            }
        }
        self.members = members;
        Ok(())
    }
}

impl BeaconQuery for BeaconState {
    fn query_locus(&mut self, locus: usize) -> Result<bool> {
        self.query(locus)
    }
}

impl BeaconQuery for &BeaconState {
    fn query_locus(&mut self, locus: usize) -> Result<bool> {
        self.query(locus)
    }
}

/// Every answer of a beacon at one version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u64,
    pub answers: Vec<bool>,
    pub member_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlipDirection {
    NoToYes,
    YesToNo,
}

/// Loci whose answer changed in `direction` between two snapshots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipSet {
    pub direction: FlipDirection,
    /// Ascending panel indices.
    pub loci: Vec<usize>,
}

impl FlipSet {
    pub fn beta(&self) -> usize {
        self.loci.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loci.is_empty()
    }

    pub fn contains(&self, locus: usize) -> bool {
        self.loci.binary_search(&locus).is_ok()
    }
}

pub fn flip_set(earlier: &Snapshot, later: &Snapshot, direction: FlipDirection) -> Result<FlipSet> {
    if earlier.answers.len() != later.answers.len() {
        return Err(ReconError::PanelMismatch(
            earlier.answers.len(),
            later.answers.len(),
        ));
    }
    let (from, to) = match direction {
        FlipDirection::NoToYes => (false, true),
        FlipDirection::YesToNo => (true, false),
    };
    let loci = earlier
        .answers
        .iter()
        .zip(&later.answers)
        .enumerate()
        .filter_map(|(j, (&a, &b))| (a == from && b == to).then_some(j))
        .collect();
    Ok(FlipSet { direction, loci })
}
