//! On-disk cascade: `manifest.json` next to one JSON file per model.

use std::{fs, path::Path};

use serde::{Deserialize, Serialize};

use super::{AugmentationTemplate, CascadeError, CascadeModel, Mode, RelationSchedule};
use crate::{learner::TrainedClassifier, metrics::RankKey};

pub const BUNDLE_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub schedule: RelationSchedule,
    pub template: AugmentationTemplate,
    pub metric_key: RankKey,
    pub mode: Mode,
    /// Model file per stage, relative to the bundle directory.
    pub stage_files: Vec<String>,
    pub final_file: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn err(what: &str, path: &Path, e: impl std::fmt::Display) -> CascadeError {
    CascadeError::Bundle(format!("{what} {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CascadeError> {
    let text = serde_json::to_string(value).map_err(|e| err("serializing", path, e))?;
    fs::write(path, text).map_err(|e| err("writing", path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CascadeError> {
    let text = fs::read_to_string(path).map_err(|e| err("reading", path, e))?;
    serde_json::from_str(&text).map_err(|e| err("parsing", path, e))
}

/// Writes `model` into `dir`, creating it if needed.
pub fn save_bundle(
    dir: &Path,
    model: &CascadeModel,
    metric_key: RankKey,
    mode: Mode,
) -> Result<BundleManifest, CascadeError> {
    fs::create_dir_all(dir).map_err(|e| err("creating", dir, e))?;
    let mut stage_files = Vec::with_capacity(model.stages.len());
    for (i, (stage, relation)) in model.stages.iter().zip(model.schedule.relations()).enumerate() {
        let name = format!("stage-{i}-{relation}.json");
        write_json(&dir.join(&name), stage)?;
        stage_files.push(name);
    }
    let final_file = "final.json".to_string();
    write_json(&dir.join(&final_file), &model.final_model)?;
    let manifest = BundleManifest {
        schedule: model.schedule.clone(),
        template: model.template.clone(),
        metric_key,
        mode,
        stage_files,
        final_file,
        warnings: model.warnings.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| err("serializing", dir, e))?;
    fs::write(dir.join(BUNDLE_MANIFEST), text + "\n").map_err(|e| err("writing", dir, e))?;
    Ok(manifest)
}

pub fn load_bundle(dir: &Path) -> Result<(CascadeModel, BundleManifest), CascadeError> {
    let manifest: BundleManifest = read_json(&dir.join(BUNDLE_MANIFEST))?;
    if manifest.stage_files.len() != manifest.schedule.len() {
        return Err(CascadeError::Bundle(format!(
            "manifest lists {} stage files for a {}-relation schedule",
            manifest.stage_files.len(),
            manifest.schedule.len()
        )));
    }
    let stages = manifest
        .stage_files
        .iter()
        .map(|f| read_json::<TrainedClassifier>(&dir.join(f)))
        .collect::<Result<Vec<_>, _>>()?;
    let final_model = read_json(&dir.join(&manifest.final_file))?;
    let model = CascadeModel {
        schedule: manifest.schedule.clone(),
        template: manifest.template.clone(),
        stages,
        final_model,
        warnings: manifest.warnings.clone(),
    };
    Ok((model, manifest))
}
