use std::path::Path;

use super::grid::{build_anchor_poses, sample_perturbed, GridSpec};
use super::render::{render_scan_with, RenderNoise};
use super::scene::Scene;
use crate::error::{Error, Result};
use crate::io::{save_manifest, write_image};
use crate::rng;
use crate::types::{DatasetManifest, Role, ScanRecord, SonarConfig};

/// Gap inserted between the time lines of consecutive assets.
pub const ASSET_TIME_GAP_S: f64 = 100.0;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Render a full grid dataset for every scene into `out_dir` and write
/// `manifest.json` there. Record ids run consecutively: each anchor is
/// followed by its perturbed samples.
pub fn generate_dataset(
    scenes: &[Scene],
    spec: &GridSpec,
    config: &SonarConfig,
    noise: &RenderNoise,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    if scenes.is_empty() {
        return Err(Error::EmptyDataset("no scenes given".into()));
    }
    spec.validate()?;
    config.validate()?;
    std::fs::create_dir_all(out_dir.join("images")).map_err(|e| Error::io(out_dir, e))?;
    let mut records = Vec::new();
    let mut next_id: u32 = 0;
    let mut t_offset = 0.0;
    for scene in scenes {
        let anchors = build_anchor_poses(scene, spec)?;
        let mut t_max: f64 = 0.0;
        for (k, anchor) in anchors.iter().enumerate() {
            let samples = sample_perturbed(anchor, scene, spec, rng::derive_seed(seed, &[scene.asset_id as u64, k as u64]));
            let poses = std::iter::once((Role::Anchor, *anchor)).chain(samples.into_iter().map(|p| (Role::Sample, p)));
            for (role, mut pose) in poses {
                let id = next_id;
                next_id += 1;
                pose.t += t_offset;
                t_max = t_max.max(pose.t);
                let image = render_scan_with(scene, &pose, config, noise, seed ^ id as u64)?;
                let image_path = format!("images/{id:06}.pgm");
                write_image(&image, &out_dir.join(&image_path))?;
                records.push(ScanRecord {
                    id,
                    pose,
                    image_path,
                    role,
                    asset_id: scene.asset_id,
                });
            }
        }
        t_offset = t_max.ceil() + ASSET_TIME_GAP_S;
    }
    let manifest = DatasetManifest {
        config: *config,
        records,
        generator_seed: seed,
    };
    save_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
