use crate::error::{Error, Result};
use crate::types::SonarImage;

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Running per-cell sum for building a pattern without holding every
/// image in memory.
#[derive(Debug, Clone, Default)]
pub struct PatternAccumulator {
    config: Option<crate::types::SonarConfig>,
    sum: Vec<f64>,
    count: usize,
}

impl PatternAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, img: &SonarImage) -> Result<()> {
        match self.config {
            None => {
                self.config = Some(*img.config());
                self.sum = vec![0.0; img.data().len()];
            }
            Some(c) if &c != img.config() => {
                return Err(Error::Validation(format!(
                    "image {} has config {:?}, expected {:?}",
                    self.count,
                    img.config(),
                    c
                )));
            }
            Some(_) => {}
        }
        for (a, v) in self.sum.iter_mut().zip(img.data()) {
            *a += v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<SonarImage> {
        let config = self
            .config
            .ok_or_else(|| Error::InvalidParam("insonification pattern needs at least one image".into()))?;
        let n = self.count as f64;
        SonarImage::from_clamped(config, self.sum.into_iter().map(|a| a / n).collect())
    }
}

/// Per-cell mean of a set of images sharing one sonar config.
///
/// Accumulation runs in input order, so the result is bitwise reproducible
/// for a given list (and equal up to rounding under permutation).
pub fn insonification_pattern(images: &[SonarImage]) -> Result<SonarImage> {
    let mut acc = PatternAccumulator::new();
    for img in images {
        acc.add(img)?;
    }
    acc.finish()
}

/// Divide out the insonification pattern, rescaled by its global mean.
pub fn normalize_insonification(
    image: &SonarImage,
    pattern: &SonarImage,
    epsilon: f64,
) -> Result<SonarImage> {
    if image.config() != pattern.config() {
        return Err(Error::Validation(
            "image and insonification pattern have different configs".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParam(format!("epsilon must be positive, got {epsilon}")));
    }
    let mean = pattern.data().iter().sum::<f64>() / pattern.data().len() as f64;
    let out = image
        .data()
        .iter()
        .zip(pattern.data())
        .map(|(&v, &p)| (v * mean / p.max(epsilon)).clamp(0.0, 1.0))
        .collect();
    SonarImage::new(*image.config(), out)
}
