use std::f64::consts::PI;
use std::fmt::Debug;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub reflectivity: f64,
}

impl Segment {
    pub fn new(a: Point, b: Point, reflectivity: f64) -> Self {
        Self { a, b, reflectivity }
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        let (dx, dy) = (self.b[0] - self.a[0], self.b[1] - self.a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p[0] - self.a[0]) * dx + (p[1] - self.a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (self.a[0] + t * dx - p[0]).hypot(self.a[1] + t * dy - p[1])
    }
}

/// A planar asset outline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub asset_id: u32,
    pub segments: Vec<Segment>,
}

impl Scene {
    pub fn new(asset_id: u32, segments: Vec<Segment>) -> Result<Self> {
        let s = Self { asset_id, segments };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Validation(format!("scene {} has no segments", self.asset_id)));
        }
        for (k, s) in self.segments.iter().enumerate() {
            if [s.a, s.b].iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!("segment {k} has non-finite endpoints")));
            }
            if !(s.reflectivity > 0.0 && s.reflectivity <= 1.0) {
                return Err(Error::Validation(format!(
                    "segment {k} reflectivity {} outside (0, 1]",
                    s.reflectivity
                )));
            }
        }
        Ok(())
    }

    /// Length-weighted centroid of the segments (plain endpoint mean when all
    /// segments are points).
    pub fn centroid(&self) -> Point {
        let total: f64 = self.segments.iter().map(Segment::length).sum();
        if total > 0.0 {
            let mut c = [0.0, 0.0];
            for s in &self.segments {
                let w = s.length() / total;
                c[0] += w * 0.5 * (s.a[0] + s.b[0]);
                c[1] += w * 0.5 * (s.a[1] + s.b[1]);
            }
            c
        } else {
            let n = 2.0 * self.segments.len() as f64;
            let sx: f64 = self.segments.iter().map(|s| s.a[0] + s.b[0]).sum();
            let sy: f64 = self.segments.iter().map(|s| s.a[1] + s.b[1]).sum();
            [sx / n, sy / n]
        }
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translated(mut self, dx: f64, dy: f64) -> Self {
        for s in self.segments.iter_mut() {
            s.a = [s.a[0] + dx, s.a[1] + dy];
            s.b = [s.b[0] + dx, s.b[1] + dy];
        }
        self
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SceneFile {
    Scene(Scene),
    Segments(Vec<Segment>),
}

/// Load a scene file: either `{"asset_id", "segments": [...]}` or a bare
/// list of segments (which then takes `default_asset_id`).
pub fn load_scene(path: &Path, default_asset_id: u32) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: SceneFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let scene = match parsed {
        SceneFile::Scene(s) => s,
        SceneFile::Segments(segments) => Scene {
            asset_id: default_asset_id,
            segments,
        },
    };
    scene.validate()?;
    Ok(scene)
}

/// Spacing between builtin assets so their footprints never overlap.
pub const BUILTIN_SPACING_M: f64 = 1000.0;

/// A builtin asset outline, centred near the origin.
pub trait SceneTemplate: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn segments(&self) -> Vec<Segment>;
}

/// Two walls meeting at a right angle.
#[derive(Debug)]
pub struct LWall;

impl SceneTemplate for LWall {
    fn name(&self) -> &'static str {
        "l-wall"
    }
    fn segments(&self) -> Vec<Segment> {
        vec![
            Segment::new([-3.0, -2.0], [3.5, -2.0], 0.9),
            Segment::new([-3.0, -2.0], [-3.0, 3.0], 0.7),
            Segment::new([3.5, -2.0], [3.5, -1.0], 0.5),
        ]
    }
}

/// Scattered short pieces of differing orientation and strength.
#[derive(Debug)]
pub struct Cluster;

impl SceneTemplate for Cluster {
    fn name(&self) -> &'static str {
        "cluster"
    }
    fn segments(&self) -> Vec<Segment> {
        vec![
            Segment::new([-2.5, 1.5], [-1.0, 2.5], 0.8),
            Segment::new([0.5, 2.0], [2.0, 1.0], 0.6),
            Segment::new([1.5, -0.5], [2.5, -2.0], 0.9),
            Segment::new([-1.0, -2.5], [0.5, -2.0], 0.5),
            Segment::new([-2.5, -1.0], [-2.0, 0.2], 0.7),
            Segment::new([-0.3, 0.0], [0.4, 0.3], 1.0),
        ]
    }
}

/// Spokes radiating from a hub.
#[derive(Debug)]
pub struct Star;

impl SceneTemplate for Star {
    fn name(&self) -> &'static str {
        "star"
    }
    fn segments(&self) -> Vec<Segment> {
        let lengths = [3.0, 2.0, 3.0, 2.5, 1.5];
        (0..5)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 5.0 + 0.3;
                let l = lengths[k];
                Segment::new([0.0, 0.0], [l * a.cos(), l * a.sin()], 0.6 + 0.08 * k as f64)
            })
            .collect()
    }
}

pub fn scene_templates() -> Registry<dyn SceneTemplate> {
    Registry::new("builtin scene")
        .with("l-wall", || Box::new(LWall) as Box<dyn SceneTemplate>)
        .with("cluster", || Box::new(Cluster) as Box<dyn SceneTemplate>)
        .with("star", || Box::new(Star) as Box<dyn SceneTemplate>)
}

/// Builtin index (1, 2, 3) to template name.
pub const BUILTIN_ORDER: [&str; 3] = ["l-wall", "cluster", "star"];

/// Builtin scene by index or name, placed at `asset_id * BUILTIN_SPACING_M`
/// along x and tagged with `asset_id`.
pub fn builtin_scene(which: &str, asset_id: u32) -> Result<Scene> {
    let name = match which.parse::<usize>() {
        Ok(i) if (1..=BUILTIN_ORDER.len()).contains(&i) => BUILTIN_ORDER[i - 1],
        Ok(i) => {
            return Err(Error::Unknown {
                kind: "builtin scene",
                name: i.to_string(),
                allowed: "1, 2, 3".into(),
            })
        }
        Err(_) => which,
    };
    let template = scene_templates().create(name)?;
    Scene::new(asset_id, template.segments()).map(|s| s.translated(asset_id as f64 * BUILTIN_SPACING_M, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_distinct_and_separated() {
        let scenes: Vec<Scene> = (1..=3).map(|i| builtin_scene(&i.to_string(), i as u32).unwrap()).collect();
        assert_ne!(scenes[0].segments.len(), scenes[1].segments.len());
        assert_ne!(scenes[1].segments.len(), scenes[2].segments.len());
        for (i, s) in scenes.iter().enumerate() {
            let c = s.centroid();
            assert!((c[0] - (i + 1) as f64 * BUILTIN_SPACING_M).abs() < 5.0);
        }
        assert_eq!(builtin_scene("star", 3).unwrap(), scenes[2]);
        assert!(builtin_scene("4", 4).is_err());
        assert!(builtin_scene("garage", 1).is_err());
    }

    #[test]
    fn point_segment_distance() {
        let s = Segment::new([0.0, 0.0], [2.0, 0.0], 1.0);
        assert_eq!(s.distance_to([1.0, 1.0]), 1.0);
        assert_eq!(s.distance_to([3.0, 0.0]), 1.0);
        assert!((s.distance_to([-1.0, -1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scene_file_forms() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        std::fs::write(&p, r#"[{"a":[0,0],"b":[1,0],"reflectivity":0.5}]"#).unwrap();
        assert_eq!(load_scene(&p, 4).unwrap().asset_id, 4);
        std::fs::write(&p, r#"{"asset_id":2,"segments":[{"a":[0,0],"b":[1,0],"reflectivity":0.5}]}"#).unwrap();
        assert_eq!(load_scene(&p, 4).unwrap().asset_id, 2);
        std::fs::write(&p, r#"[{"a":[0,0],"b":[1,0],"reflectivity":1.5}]"#).unwrap();
        assert!(load_scene(&p, 4).is_err());
        std::fs::write(&p, r#"[]"#).unwrap();
        assert!(load_scene(&p, 4).is_err());
    }
}
