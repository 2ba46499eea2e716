//! Sonar field-of-view sectors and their overlap ratio, the ground-truth
//! place-similarity measure.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{wrap_angle, Pose2D, SonarConfig};

pub type Point = [f64; 2];

/// Default number of chords approximating the sector arc.
pub const DEFAULT_N_ARC: usize = 64;

/// Convex counter-clockwise polygon; for sectors the first vertex is the apex.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorPolygon {
    vertices: Vec<Point>,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

impl SectorPolygon {
    /// Wrap a vertex list, checking it is convex, counter-clockwise and has
    /// positive area.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} vertices", vertices.len())));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let area = signed_area(&vertices);
        if !(area > 0.0) {
            return Err(Error::DegeneratePolygon(format!(
                "signed area {area} (must be positive, counter-clockwise)"
            )));
        }
        let n = vertices.len();
        let scale = vertices
            .iter()
            .flatten()
            .fold(1.0f64, |m, c| m.max(c.abs()));
        let tol = -1e-9 * scale * scale;
        for i in 0..n {
            if cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]) < tol {
                return Err(Error::DegeneratePolygon(format!("not convex at vertex {}", (i + 1) % n)));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }
}

/// Inscribed polygon of the sonar footprint: apex at the pose, arc vertices
/// on the range circle.
pub fn sector_polygon(pose: &Pose2D, config: &SonarConfig, n_arc: usize) -> Result<SectorPolygon> {
    if n_arc < 8 {
        return Err(Error::InvalidParam(format!("n_arc must be at least 8, got {n_arc}")));
    }
    config.validate()?;
    let r = config.max_range_m;
    let start = pose.heading - 0.5 * config.aperture_rad;
    let mut v = Vec::with_capacity(n_arc + 2);
    v.push([pose.x, pose.y]);
    for k in 0..=n_arc {
        let a = start + config.aperture_rad * k as f64 / n_arc as f64;
        v.push([pose.x + r * a.cos(), pose.y + r * a.sin()]);
    }
    SectorPolygon::new(v)
}

/// Clip `subject` to the left half-plane of the directed edge `a -> b`.
fn clip_half_plane(subject: &[Point], a: Point, b: Point) -> Vec<Point> {
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = subject[i];
        let next = subject[(i + 1) % n];
        let dc = cross(a, b, cur);
        let dn = cross(a, b, next);
        if dc >= 0.0 {
            out.push(cur);
        }
        if (dc >= 0.0) != (dn >= 0.0) {
            let t = dc / (dc - dn);
            out.push([cur[0] + t * (next[0] - cur[0]), cur[1] + t * (next[1] - cur[1])]);
        }
    }
    out
}

fn bbox(v: &[Point]) -> [f64; 4] {
    v.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
    )
}

/// Area of the intersection of two convex polygons (Sutherland-Hodgman).
pub fn convex_intersection_area(a: &SectorPolygon, b: &SectorPolygon) -> f64 {
    let (ba, bb) = (bbox(&a.vertices), bbox(&b.vertices));
    if ba[2] < bb[0] || bb[2] < ba[0] || ba[3] < bb[1] || bb[3] < ba[1] {
        return 0.0;
    }
    let mut poly = a.vertices.clone();
    let n = b.vertices.len();
    for i in 0..n {
        if poly.len() < 3 {
            return 0.0;
        }
        poly = clip_half_plane(&poly, b.vertices[i], b.vertices[(i + 1) % n]);
    }
    if poly.len() < 3 {
        return 0.0;
    }
    signed_area(&poly).max(0.0)
}

/// Intersection area of the two footprints over the area of one footprint.
pub fn fov_overlap(p1: &Pose2D, p2: &Pose2D, config: &SonarConfig, n_arc: usize) -> Result<f64> {
    let a = sector_polygon(p1, config, n_arc)?;
    let dx = p1.x - p2.x;
    let dy = p1.y - p2.y;
    if dx * dx + dy * dy > 4.0 * config.max_range_m * config.max_range_m {
        return Ok(0.0);
    }
    let b = sector_polygon(p2, config, n_arc)?;
    Ok((convex_intersection_area(&a, &b) / a.area()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityParams {
    pub tau: f64,
    pub max_heading_diff_rad: f64,
    #[serde(default = "default_n_arc")]
    pub n_arc: usize,
}

fn default_n_arc() -> usize {
    DEFAULT_N_ARC
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            tau: 0.7,
            max_heading_diff_rad: PI / 2.0,
            n_arc: DEFAULT_N_ARC,
        }
    }
}

impl SimilarityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParam(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if !(self.max_heading_diff_rad > 0.0 && self.max_heading_diff_rad <= PI) {
            return Err(Error::InvalidParam(format!(
                "max heading difference must be in (0, pi], got {}",
                self.max_heading_diff_rad
            )));
        }
        Ok(())
    }
}

/// Same place: headings within the limit and overlap at least `tau`.
pub fn is_positive_pair(p1: &Pose2D, p2: &Pose2D, config: &SonarConfig, params: &SimilarityParams) -> Result<bool> {
    if wrap_angle(p1.heading - p2.heading).abs() > params.max_heading_diff_rad {
        return Ok(false);
    }
    Ok(fov_overlap(p1, p2, config, params.n_arc)? >= params.tau)
}

/// Footprints of a fixed set of poses, for repeated pair queries.
#[derive(Debug, Clone)]
pub struct FootprintSet {
    poses: Vec<Pose2D>,
    polygons: Vec<SectorPolygon>,
    max_range_m: f64,
}

impl FootprintSet {
    pub fn new(poses: Vec<Pose2D>, config: &SonarConfig, n_arc: usize) -> Result<Self> {
        let polygons = poses
            .iter()
            .map(|p| sector_polygon(p, config, n_arc))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            poses,
            polygons,
            max_range_m: config.max_range_m,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn pose(&self, i: usize) -> &Pose2D {
        &self.poses[i]
    }

    /// Same value as [`fov_overlap`] on poses `i` and `j`.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        let (p1, p2) = (&self.poses[i], &self.poses[j]);
        let dx = p1.x - p2.x;
        let dy = p1.y - p2.y;
        if dx * dx + dy * dy > 4.0 * self.max_range_m * self.max_range_m {
            return 0.0;
        }
        let a = &self.polygons[i];
        (convex_intersection_area(a, &self.polygons[j]) / a.area()).clamp(0.0, 1.0)
    }

    /// Same value as [`is_positive_pair`] on poses `i` and `j`.
    pub fn is_positive(&self, i: usize, j: usize, params: &SimilarityParams) -> bool {
        wrap_angle(self.poses[i].heading - self.poses[j].heading).abs() <= params.max_heading_diff_rad
            && self.overlap(i, j) >= params.tau
    }
}
