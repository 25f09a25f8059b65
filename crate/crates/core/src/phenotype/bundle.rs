use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::TraitModel;
use crate::error::{ReconError, Result};

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub trait_name: String,
    pub file: String,
    pub cv_f1: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: u32,
    pub traits: Vec<ManifestEntry>,
}

/// Writes one JSON file per model plus `manifest.json` into `dir`, creating
/// it when needed.
pub fn save_bundle(dir: &Path, models: &[TraitModel]) -> Result<BundleManifest> {
    fs::create_dir_all(dir)?;
    let mut traits = Vec::with_capacity(models.len());
    for (i, model) in models.iter().enumerate() {
        let file = format!("trait-{i:03}.json");
        fs::write(dir.join(&file), serde_json::to_vec(model)?)?;
        traits.push(ManifestEntry {
            trait_name: model.trait_name.clone(),
            file,
            cv_f1: model.cv_f1,
            retained: model.retained,
        });
    }
    let manifest = BundleManifest { format: 1, traits };
    fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_bundle(dir: &Path) -> Result<Vec<TraitModel>> {
    let manifest: BundleManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
    if manifest.format != 1 {
        return Err(ReconError::InvalidArgument(format!(
            "unsupported bundle format {}",
            manifest.format
        )));
    }
    manifest
        .traits
        .iter()
        .map(|entry| {
            let model: TraitModel = serde_json::from_slice(&fs::read(dir.join(&entry.file))?)?;
            if model.trait_name != entry.trait_name {
                return Err(ReconError::InvalidArgument(format!(
                    "{} holds trait {} but the manifest says {}",
                    entry.file, model.trait_name, entry.trait_name
                )));
            }
            Ok(model)
        })
        .collect()
}
