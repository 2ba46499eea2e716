//! Synthetic dataset generation: grid-sampled anchors around planar assets,
//! perturbed samples and a raycast renderer.

mod dataset;
mod grid;
mod render;
mod scene;

pub use dataset::{generate_dataset, ASSET_TIME_GAP_S, MANIFEST_FILE};
pub use grid::{build_anchor_poses, sample_perturbed, GridSpec};
pub use render::{beam_angle, render_scan, render_scan_with, RenderNoise, SPREAD_BINS};
pub use scene::{
    builtin_scene, load_scene, scene_templates, Cluster, LWall, Scene, SceneTemplate, Segment, Star,
    BUILTIN_ORDER, BUILTIN_SPACING_M,
};
