use std::fmt::Debug;

use super::cfar::{cfar_threshold, CfarParams};
use super::dwt::{dwt_denoise, DwtParams};
use super::insonification::normalize_insonification;
use crate::error::Result;
use crate::types::SonarImage;

/// One step of the enhancement chain.
pub trait EnhanceStage: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn apply(&self, image: &SonarImage) -> Result<SonarImage>;
}

#[derive(Debug, Clone)]
pub struct NormalizeStage {
    pub pattern: SonarImage,
    pub epsilon: f64,
}

impl EnhanceStage for NormalizeStage {
    fn name(&self) -> &'static str {
        "normalize"
    }
    fn apply(&self, image: &SonarImage) -> Result<SonarImage> {
        normalize_insonification(image, &self.pattern, self.epsilon)
    }
}

#[derive(Debug, Clone)]
pub struct DwtStage(pub DwtParams);

impl EnhanceStage for DwtStage {
    fn name(&self) -> &'static str {
        "dwt"
    }
    fn apply(&self, image: &SonarImage) -> Result<SonarImage> {
        dwt_denoise(image, &self.0)
    }
}

#[derive(Debug, Clone)]
pub struct CfarStage(pub CfarParams);

impl EnhanceStage for CfarStage {
    fn name(&self) -> &'static str {
        "cfar"
    }
    fn apply(&self, image: &SonarImage) -> Result<SonarImage> {
        cfar_threshold(image, &self.0)
    }
}

/// Ordered list of stages applied left to right.
#[derive(Debug, Default)]
pub struct EnhanceChain {
    stages: Vec<Box<dyn EnhanceStage>>,
}

impl EnhanceChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, stage: impl EnhanceStage + 'static) -> Self {
        self.stages.push(Box::new(stage));
        self
    }

    pub fn stage_names(&self) -> Vec<&'static str> {
        self.stages.iter().map(|s| s.name()).collect()
    }

    pub fn apply(&self, image: &SonarImage) -> Result<SonarImage> {
        self.stages
            .iter()
            .try_fold(image.clone(), |img, stage| stage.apply(&img))
    }
}

/// normalize, then DWT denoise, then CFAR.
pub fn enhance_pipeline(
    image: &SonarImage,
    pattern: &SonarImage,
    dwt: &DwtParams,
    cfar: &CfarParams,
) -> Result<SonarImage> {
    EnhanceChain::new()
        .push(NormalizeStage {
            pattern: pattern.clone(),
            epsilon: super::insonification::DEFAULT_EPSILON,
        })
        .push(DwtStage(*dwt))
        .push(CfarStage(cfar.clone()))
        .apply(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhance::insonification_pattern;
    use crate::io::encode_pgm;
    use crate::rng;
    use crate::types::SonarConfig;
    use rand::Rng;

    fn cfg() -> SonarConfig {
        SonarConfig::new(30.0, 2.0, 16, 128).unwrap()
    }

    fn random_image(seed: u64) -> SonarImage {
        let mut r = rng::rng_from(seed);
        let data = (0..16 * 128)
            .map(|i| {
                let spike = if i % 37 == 0 { 0.8 } else { 0.0 };
                (0.05 * r.random::<f64>() + spike).min(1.0)
            })
            .collect();
        SonarImage::new(cfg(), data).unwrap()
    }

    #[test]
    fn zero_image_stays_zero() {
        let zero = SonarImage::filled(cfg(), 0.0).unwrap();
        let pattern = SonarImage::filled(cfg(), 0.2).unwrap();
        let out = enhance_pipeline(
            &zero,
            &pattern,
            &DwtParams::default(),
            &CfarParams::with_defaults("goca").unwrap(),
        )
        .unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equals_manual_composition() {
        let imgs: Vec<SonarImage> = (0..5).map(random_image).collect();
        let pattern = insonification_pattern(&imgs).unwrap();
        let dwt = DwtParams::default();
        let cfar = CfarParams::with_defaults("soca").unwrap();
        let manual = cfar_threshold(
            &dwt_denoise(
                &normalize_insonification(&imgs[2], &pattern, super::super::insonification::DEFAULT_EPSILON)
                    .unwrap(),
                &dwt,
            )
            .unwrap(),
            &cfar,
        )
        .unwrap();
        assert_eq!(enhance_pipeline(&imgs[2], &pattern, &dwt, &cfar).unwrap(), manual);
    }

    #[test]
    fn deterministic_bytes() {
        let img = random_image(11);
        let pattern = insonification_pattern(&[img.clone(), random_image(12)]).unwrap();
        let run = || {
            let out = enhance_pipeline(
                &img,
                &pattern,
                &DwtParams::default(),
                &CfarParams::with_defaults("goca").unwrap(),
            )
            .unwrap();
            encode_pgm(out.n_bins(), out.n_beams(), out.data()).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn chain_reports_stages() {
        let chain = EnhanceChain::new()
            .push(DwtStage(DwtParams::default()))
            .push(CfarStage(CfarParams::with_defaults("soca").unwrap()));
        assert_eq!(chain.stage_names(), ["dwt", "cfar"]);
    }
}
