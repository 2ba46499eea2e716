//! Domain types shared by every stage.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Descriptor dimensionality.
pub const DESCRIPTOR_DIM: usize = 128;

/// Sonar geometry and sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SonarConfig {
    pub max_range_m: f64,
    pub aperture_rad: f64,
    pub n_beams: usize,
    pub n_bins: usize,
}

impl SonarConfig {
    pub fn new(max_range_m: f64, aperture_rad: f64, n_beams: usize, n_bins: usize) -> Result<Self> {
        let c = Self {
            max_range_m,
            aperture_rad,
            n_beams,
            n_bins,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_range_m.is_finite() && self.max_range_m > 0.0) {
            return Err(Error::Validation(format!(
                "max_range_m must be positive, got {}",
                self.max_range_m
            )));
        }
        if !(self.aperture_rad > 0.0 && self.aperture_rad <= PI) {
            return Err(Error::Validation(format!(
                "aperture_rad must be in (0, pi], got {}",
                self.aperture_rad
            )));
        }
        if self.n_beams < 2 || self.n_bins < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 beams and 2 bins, got {}x{}",
                self.n_beams, self.n_bins
            )));
        }
        Ok(())
    }
}

impl Default for SonarConfig {
    /// 30 m range, 120 degree aperture.
    fn default() -> Self {
        Self {
            max_range_m: 30.0,
            aperture_rad: 120f64.to_radians(),
            n_beams: 128,
            n_bins: 256,
        }
    }
}

/// Polar intensity grid, `n_beams` rows by `n_bins` columns, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SonarImage {
    config: SonarConfig,
    data: Vec<f64>,
}

impl SonarImage {
    pub fn new(config: SonarConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = config.n_beams * config.n_bins;
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "image has {} values, config {}x{} needs {}",
                data.len(),
                config.n_beams,
                config.n_bins,
                expected
            )));
        }
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::Validation(format!(
                "value {v} at beam {}, bin {} outside [0, 1]",
                i / config.n_bins,
                i % config.n_bins
            )));
        }
        Ok(Self { config, data })
    }

    /// Build an image by clamping every value into [0, 1]. Non-finite values
    /// are still rejected.
    pub fn from_clamped(config: SonarConfig, mut data: Vec<f64>) -> Result<Self> {
        for v in data.iter_mut() {
            if v.is_finite() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        Self::new(config, data)
    }

    pub fn filled(config: SonarConfig, value: f64) -> Result<Self> {
        Self::new(config, vec![value; config.n_beams * config.n_bins])
    }

    pub fn config(&self) -> &SonarConfig {
        &self.config
    }

    pub fn n_beams(&self) -> usize {
        self.config.n_beams
    }

    pub fn n_bins(&self) -> usize {
        self.config.n_bins
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, beam: usize, bin: usize) -> f64 {
        self.data[beam * self.config.n_bins + bin]
    }

    pub fn beam(&self, beam: usize) -> &[f64] {
        let n = self.config.n_bins;
        &self.data[beam * n..(beam + 1) * n]
    }

    pub fn beams(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.config.n_bins)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Planar pose with acquisition timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub t: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64, t: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.heading.is_finite() && self.t.is_finite()) {
            return Err(Error::Validation(format!("non-finite pose {self:?}")));
        }
        if self.t < 0.0 {
            return Err(Error::Validation(format!("negative timestamp {}", self.t)));
        }
        Ok(())
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Unit-norm 128-dimensional descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Vec<f64>,
}

impl Descriptor {
    pub const NORM_TOLERANCE: f64 = 1e-6;

    /// Wrap an already-normalized vector.
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(Error::Shape(format!(
                "descriptor has {} entries, expected {DESCRIPTOR_DIM}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite descriptor entry".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::Validation(format!("descriptor norm {norm} is not 1")));
        }
        Ok(Self { values })
    }

    /// L2-normalize `values`. A zero (or non-finite) vector maps to the first
    /// basis direction and the returned flag is `true`.
    pub fn normalize(values: &[f64]) -> Result<(Self, bool)> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(Error::Shape(format!(
                "descriptor has {} entries, expected {DESCRIPTOR_DIM}",
                values.len()
            )));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            Ok((
                Self {
                    values: values.iter().map(|v| v / norm).collect(),
                },
                false,
            ))
        } else {
            Ok((Self::fallback(), true))
        }
    }

    pub fn fallback() -> Self {
        let mut values = vec![0.0; DESCRIPTOR_DIM];
        values[0] = 1.0;
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, other: &Descriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Whether a scan was taken at a grid-cell center or perturbed around one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Anchor,
    Sample,
}

impl Role {
    pub const ALLOWED: [&'static str; 2] = ["anchor", "sample"];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Anchor => "anchor",
            Role::Sample => "sample",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "anchor" => Ok(Role::Anchor),
            "sample" => Ok(Role::Sample),
            other => Err(Error::Unknown {
                kind: "role",
                name: other.to_string(),
                allowed: Role::ALLOWED.join(", "),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub id: u32,
    pub pose: Pose2D,
    pub image_path: String,
    pub role: Role,
    pub asset_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub config: SonarConfig,
    pub records: Vec<ScanRecord>,
    pub generator_seed: u64,
}

impl DatasetManifest {
    /// Check id uniqueness, pose validity and the sonar config.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id) {
                return Err(Error::Validation(format!("duplicate record id {}", r.id)));
            }
            r.pose.validate()?;
        }
        Ok(())
    }

    pub fn record(&self, id: u32) -> Option<&ScanRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Distinct asset ids in ascending order.
    pub fn asset_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.asset_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Copy of this manifest restricted to the given assets.
    pub fn filter_assets(&self, assets: &[u32]) -> DatasetManifest {
        DatasetManifest {
            config: self.config,
            generator_seed: self.generator_seed,
            records: self
                .records
                .iter()
                .filter(|r| assets.contains(&r.asset_id))
                .cloned()
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.5 * PI) - 0.5 * PI).abs() < 1e-12);
        assert!((wrap_angle(-2.5 * PI) + 0.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn config_invariants() {
        assert!(SonarConfig::new(30.0, PI, 2, 2).is_ok());
        assert!(SonarConfig::new(0.0, 1.0, 2, 2).is_err());
        assert!(SonarConfig::new(30.0, PI + 1e-9, 2, 2).is_err());
        assert!(SonarConfig::new(30.0, 1.0, 1, 2).is_err());
    }

    #[test]
    fn image_rejects_out_of_range() {
        let c = SonarConfig::new(1.0, 1.0, 2, 2).unwrap();
        assert!(SonarImage::new(c, vec![0.0, 1.0, 0.5, f64::NAN]).is_err());
        assert!(SonarImage::new(c, vec![0.0, 1.1, 0.5, 0.2]).is_err());
        assert!(SonarImage::new(c, vec![0.0; 3]).is_err());
        let img = SonarImage::from_clamped(c, vec![-1.0, 2.0, 0.5, 0.2]).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0, 0.5, 0.2]);
    }

    #[test]
    fn descriptor_normalization() {
        let mut v = vec![0.0; DESCRIPTOR_DIM];
        v[3] = 2.0;
        v[5] = -2.0;
        let (d, degenerate) = Descriptor::normalize(&v).unwrap();
        assert!(!degenerate);
        assert!((d.dot(&d) - 1.0).abs() < 1e-12);
        let (z, degenerate) = Descriptor::normalize(&vec![0.0; DESCRIPTOR_DIM]).unwrap();
        assert!(degenerate);
        assert_eq!(z, Descriptor::fallback());
        assert!(Descriptor::from_unit(vec![0.5; DESCRIPTOR_DIM]).is_err());
    }

    #[test]
    fn role_parse_lists_allowed() {
        let e = Role::parse("query").unwrap_err().to_string();
        assert!(e.contains("anchor") && e.contains("sample"), "{e}");
    }
}
