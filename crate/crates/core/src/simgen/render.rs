//! Planar raycast sonar renderer: one ray per beam, first hit only,
//! Lambertian return with a Gaussian range spread, acoustic shadow behind
//! the hit, multiplicative speckle and an additive noise floor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::{Scene, Segment};
use crate::error::Result;
use crate::rng;
use crate::types::{Pose2D, SonarConfig, SonarImage};

/// Half-width (in bins) of the range spread around the hit bin.
pub const SPREAD_BINS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderNoise {
    pub speckle_min: f64,
    pub speckle_max: f64,
    pub additive_max: f64,
}

impl Default for RenderNoise {
    fn default() -> Self {
        Self {
            speckle_min: 0.8,
            speckle_max: 1.2,
            additive_max: 0.02,
        }
    }
}

impl RenderNoise {
    pub fn none() -> Self {
        Self {
            speckle_min: 1.0,
            speckle_max: 1.0,
            additive_max: 0.0,
        }
    }
}

/// Distance along the ray and |cos| of the incidence angle for the nearest
/// hit on `seg`, if any.
fn ray_hit(origin: [f64; 2], dir: [f64; 2], seg: &Segment) -> Option<(f64, f64)> {
    let e = [seg.b[0] - seg.a[0], seg.b[1] - seg.a[1]];
    let denom = dir[0] * e[1] - dir[1] * e[0];
    let len = seg.length();
    if denom.abs() < 1e-12 || len == 0.0 {
        return None;
    }
    let w = [seg.a[0] - origin[0], seg.a[1] - origin[1]];
    let s = (w[0] * e[1] - w[1] * e[0]) / denom;
    let u = (w[0] * dir[1] - w[1] * dir[0]) / denom;
    if s <= 0.0 || !(0.0..=1.0).contains(&u) {
        return None;
    }
    // normal (e_y, -e_x) / len
    let cos = ((dir[0] * e[1] - dir[1] * e[0]) / len).abs();
    Some((s, cos))
}

/// Nearest hit over all segments: (distance, intensity).
fn cast(scene: &Scene, origin: [f64; 2], angle: f64) -> Option<(f64, f64)> {
    let dir = [angle.cos(), angle.sin()];
    scene
        .segments
        .iter()
        .filter_map(|seg| ray_hit(origin, dir, seg).map(|(d, cos)| (d, seg.reflectivity * cos)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Beam centre angle for beam `b`.
pub fn beam_angle(pose: &Pose2D, config: &SonarConfig, b: usize) -> f64 {
    pose.heading - 0.5 * config.aperture_rad + (b as f64 + 0.5) * config.aperture_rad / config.n_beams as f64
}

pub fn render_scan_with(
    scene: &Scene,
    pose: &Pose2D,
    config: &SonarConfig,
    noise: &RenderNoise,
    noise_seed: u64,
) -> Result<SonarImage> {
    config.validate()?;
    let (nb, nr) = (config.n_beams, config.n_bins);
    let mut data = vec![0.0; nb * nr];
    for b in 0..nb {
        let Some((d, intensity)) = cast(scene, [pose.x, pose.y], beam_angle(pose, config, b)) else {
            continue;
        };
        if d >= config.max_range_m {
            continue;
        }
        let hit = ((d / config.max_range_m) * nr as f64).floor() as usize;
        let lo = hit.saturating_sub(SPREAD_BINS);
        let hi = (hit + SPREAD_BINS).min(nr - 1);
        for k in lo..=hi {
            let off = k as f64 - hit as f64;
            data[b * nr + k] = intensity * (-0.5 * off * off).exp();
        }
    }
    let mut r = rng::rng_from(noise_seed);
    let speckle = noise.speckle_max > noise.speckle_min;
    for v in data.iter_mut() {
        let f = if speckle {
            r.random_range(noise.speckle_min..=noise.speckle_max)
        } else {
            noise.speckle_min
        };
        let a = if noise.additive_max > 0.0 {
            r.random_range(0.0..=noise.additive_max)
        } else {
            0.0
        };
        *v = *v * f + a;
    }
    SonarImage::from_clamped(*config, data)
}

/// Render with the default speckle and noise floor.
pub fn render_scan(scene: &Scene, pose: &Pose2D, config: &SonarConfig, noise_seed: u64) -> Result<SonarImage> {
    render_scan_with(scene, pose, config, &RenderNoise::default(), noise_seed)
}
