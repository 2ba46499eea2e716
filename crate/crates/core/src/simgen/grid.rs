use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::error::{Error, Result};
use crate::rng;
use crate::types::Pose2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub grid_size_m: f64,
    pub cell_size_m: f64,
    pub noise_max_m: f64,
    pub n_samples_per_anchor: usize,
}

impl Default for GridSpec {
    /// 50 m x 50 m grid of 2 m cells, 0-75 cm perturbation, 5 samples.
    fn default() -> Self {
        Self {
            grid_size_m: 50.0,
            cell_size_m: 2.0,
            noise_max_m: 0.75,
            n_samples_per_anchor: 5,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size_m > 0.0 && self.grid_size_m > 0.0) {
            return Err(Error::InvalidParam("grid and cell sizes must be positive".into()));
        }
        if self.cell_size_m > self.grid_size_m {
            return Err(Error::InvalidParam(format!(
                "cell size {} exceeds grid size {}",
                self.cell_size_m, self.grid_size_m
            )));
        }
        if !(self.noise_max_m >= 0.0 && self.noise_max_m.is_finite()) {
            return Err(Error::InvalidParam("noise_max_m must be non-negative".into()));
        }
        if self.n_samples_per_anchor == 0 {
            return Err(Error::InvalidParam("need at least one sample per anchor".into()));
        }
        Ok(())
    }

    pub fn cells_per_side(&self) -> usize {
        (self.grid_size_m / self.cell_size_m + 1e-9).floor() as usize
    }
}

fn facing(scene: &Scene, x: f64, y: f64) -> f64 {
    let c = scene.centroid();
    (c[1] - y).atan2(c[0] - x)
}

/// Anchor poses at the centres of grid cells around the scene centroid,
/// skipping cells that collide with the scene and facing the centroid.
/// Timestamps run 0, 1, 2, ... in row-major order.
pub fn build_anchor_poses(scene: &Scene, spec: &GridSpec) -> Result<Vec<Pose2D>> {
    spec.validate()?;
    scene.validate()?;
    let n = spec.cells_per_side();
    let c = scene.centroid();
    let half = 0.5 * n as f64 * spec.cell_size_m;
    let mut poses = Vec::with_capacity(n * n);
    for row in 0..n {
        let y = c[1] - half + (row as f64 + 0.5) * spec.cell_size_m;
        for col in 0..n {
            let x = c[0] - half + (col as f64 + 0.5) * spec.cell_size_m;
            if scene.distance_to([x, y]) < 0.5 * spec.cell_size_m {
                continue;
            }
            let t = poses.len() as f64;
            poses.push(Pose2D::new(x, y, facing(scene, x, y), t));
        }
    }
    if poses.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "every grid cell collides with scene {}",
            scene.asset_id
        )));
    }
    Ok(poses)
}

/// Perturbed copies of an anchor: uniform direction, radius uniform in
/// `[0, noise_max_m]`, re-aimed at the centroid. Sample `k` is stamped
/// `anchor.t + (k + 1) / (n + 1)`.
pub fn sample_perturbed(anchor: &Pose2D, scene: &Scene, spec: &GridSpec, seed: u64) -> Vec<Pose2D> {
    let mut r = rng::rng_from(seed);
    let n = spec.n_samples_per_anchor;
    (0..n)
        .map(|k| {
            let angle = r.random_range(0.0..2.0 * PI);
            let radius = if spec.noise_max_m > 0.0 {
                r.random_range(0.0..=spec.noise_max_m)
            } else {
                0.0
            };
            let x = anchor.x + radius * angle.cos();
            let y = anchor.y + radius * angle.sin();
            let t = anchor.t + (k + 1) as f64 / (n + 1) as f64;
            Pose2D::new(x, y, facing(scene, x, y), t)
        })
        .collect()
}
