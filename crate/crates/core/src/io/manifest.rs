//! JSON dataset manifest.
//!
//! Layout (key order is fixed):
//! `{"config": {max_range_m, aperture_rad, n_beams, n_bins}, "generator_seed",
//! "records": [{id, x, y, heading, t, image_path, role, asset_id}]}`.
//! Image paths are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DatasetManifest, Pose2D, Role, ScanRecord, SonarConfig};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    config: SonarConfig,
    generator_seed: u64,
    records: Vec<RecordFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordFile {
    id: u32,
    x: f64,
    y: f64,
    heading: f64,
    t: f64,
    image_path: String,
    role: String,
    asset_id: u32,
}

/// Directory that a manifest's relative image paths are resolved against.
pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

pub fn resolve_image_path(manifest_path: &Path, record: &ScanRecord) -> PathBuf {
    manifest_dir(manifest_path).join(&record.image_path)
}

fn from_file(file: ManifestFile) -> Result<DatasetManifest> {
    let records = file
        .records
        .into_iter()
        .map(|r| {
            Ok(ScanRecord {
                id: r.id,
                pose: Pose2D {
                    x: r.x,
                    y: r.y,
                    heading: r.heading,
                    t: r.t,
                },
                image_path: r.image_path,
                role: Role::parse(&r.role)?,
                asset_id: r.asset_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        config: file.config,
        records,
        generator_seed: file.generator_seed,
    };
    manifest.validate()?;
    Ok(manifest)
}

fn to_file(manifest: &DatasetManifest) -> ManifestFile {
    ManifestFile {
        config: manifest.config,
        generator_seed: manifest.generator_seed,
        records: manifest
            .records
            .iter()
            .map(|r| RecordFile {
                id: r.id,
                x: r.pose.x,
                y: r.pose.y,
                heading: r.pose.heading,
                t: r.pose.t,
                image_path: r.image_path.clone(),
                role: r.role.as_str().to_string(),
                asset_id: r.asset_id,
            })
            .collect(),
    }
}

/// Parse a manifest without checking that image files exist.
pub fn parse_manifest(text: &str, path: &Path) -> Result<DatasetManifest> {
    let file: ManifestFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    from_file(file)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = parse_manifest(&text, path)?;
    for r in &manifest.records {
        let img = resolve_image_path(path, r);
        if !img.is_file() {
            return Err(Error::Validation(format!(
                "record {}: image path '{}' does not resolve",
                r.id,
                img.display()
            )));
        }
    }
    Ok(manifest)
}

pub fn manifest_to_json(manifest: &DatasetManifest) -> Result<String> {
    manifest.validate()?;
    let mut s = serde_json::to_string_pretty(&to_file(manifest))
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let json = manifest_to_json(manifest)?;
    super::write_bytes(path, json.as_bytes())
}
