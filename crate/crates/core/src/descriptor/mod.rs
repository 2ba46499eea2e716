//! Descriptor extraction: resize, convolutional encoder, flatten, frozen
//! random projection to 128 dimensions, unit normalization.

mod encoder;
mod resize;
mod rgp;
mod store;
mod weights_file;

pub use encoder::{
    backward, extract_features, forward, init_encoder, ConvLayer, EncoderParams, EncoderWeights,
    ForwardCache, Tensor3,
};
pub use resize::{resize_image, INPUT_H, INPUT_W};
pub use rgp::{rgp_project, RgpMatrix};
pub use store::ImageStore;
pub use weights_file::{read_weights, weights_from_bytes, weights_to_bytes, write_weights, WEIGHTS_MAGIC};

use crate::error::{Error, Result};
use crate::types::{Descriptor, SonarImage};

/// Encoder weights plus the frozen projection sized to their output.
#[derive(Debug, Clone)]
pub struct DescriptorModel {
    pub weights: EncoderWeights,
    pub rgp: RgpMatrix,
}

impl DescriptorModel {
    pub fn new(weights: EncoderWeights, rgp_seed: u64) -> Result<Self> {
        let rgp = RgpMatrix::new(weights.params.feature_len(), rgp_seed)?;
        Ok(Self { weights, rgp })
    }

    /// Randomly initialized encoder.
    pub fn random(params: &EncoderParams, rgp_seed: u64) -> Result<Self> {
        Self::new(init_encoder(params)?, rgp_seed)
    }

    pub fn input_for(&self, image: &SonarImage) -> Tensor3 {
        resize_image(image, self.weights.params.input_h, self.weights.params.input_w)
    }

    pub fn describe(&self, image: &SonarImage) -> Result<Descriptor> {
        describe(image, &self.weights, &self.rgp)
    }

    /// Descriptor of an already-resized input; the flag marks the fallback.
    pub fn describe_input(&self, input: &Tensor3) -> Result<(Descriptor, bool)> {
        let f = extract_features(input, &self.weights)?;
        Descriptor::normalize(&rgp_project(&f, &self.rgp)?)
    }
}

/// Full extraction. A zero projection falls back to the first basis vector
/// with a warning.
pub fn describe(image: &SonarImage, weights: &EncoderWeights, matrix: &RgpMatrix) -> Result<Descriptor> {
    Ok(describe_flagged(image, weights, matrix)?.0)
}

pub fn describe_flagged(
    image: &SonarImage,
    weights: &EncoderWeights,
    matrix: &RgpMatrix,
) -> Result<(Descriptor, bool)> {
    if matrix.cols() != weights.params.feature_len() {
        return Err(Error::Shape(format!(
            "projection expects {} features, encoder produces {}",
            matrix.cols(),
            weights.params.feature_len()
        )));
    }
    let input = resize_image(image, weights.params.input_h, weights.params.input_w);
    let f = extract_features(&input, weights)?;
    let (d, degenerate) = Descriptor::normalize(&rgp_project(&f, matrix)?)?;
    if degenerate {
        log::warn!("degenerate descriptor: zero projection, using fallback direction");
    }
    Ok((d, degenerate))
}

/// `1 - a.b`, clamped to `[0, 2]`. Identical descriptors are exactly 0
/// apart regardless of rounding in the dot product.
pub fn cosine_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    if a.values() == b.values() {
        return 0.0;
    }
    (1.0 - a.dot(b)).clamp(0.0, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::types::{SonarConfig, DESCRIPTOR_DIM};
    use proptest::prelude::*;
    use rand::Rng;

    fn small_params() -> EncoderParams {
        EncoderParams {
            input_h: 64,
            input_w: 50,
            channel_widths: vec![4, 8],
            seed: 1,
            ..Default::default()
        }
    }

    fn noisy_image(seed: u64) -> SonarImage {
        let c = SonarConfig::default();
        let mut r = rng::rng_from(seed);
        let data = (0..c.n_beams * c.n_bins)
            .map(|i| if (i / 7) % 5 == 0 { 0.8 } else { 0.1 * r.random::<f64>() })
            .collect();
        SonarImage::new(c, data).unwrap()
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let m = DescriptorModel::random(&small_params(), 2).unwrap();
        let img = noisy_image(1);
        let d = m.describe(&img).unwrap();
        let n = d.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
        assert_eq!(d, m.describe(&img).unwrap());
        assert_eq!(d, DescriptorModel::random(&small_params(), 2).unwrap().describe(&img).unwrap());
    }

    #[test]
    fn zero_image_falls_back() {
        let m = DescriptorModel::random(&small_params(), 2).unwrap();
        let img = SonarImage::filled(SonarConfig::default(), 0.0).unwrap();
        let (d, flag) = describe_flagged(&img, &m.weights, &m.rgp).unwrap();
        assert!(flag);
        assert_eq!(d, Descriptor::fallback());
    }

    #[test]
    fn mismatched_projection_is_rejected() {
        let m = DescriptorModel::random(&small_params(), 2).unwrap();
        let wrong = RgpMatrix::new(10, 0).unwrap();
        assert!(describe(&noisy_image(0), &m.weights, &wrong).is_err());
    }

    #[test]
    fn near_duplicate_stability() {
        let m = DescriptorModel::random(&EncoderParams::default(), 5).unwrap();
        let img = noisy_image(3);
        let mut r = rng::rng_from(4);
        let noisy: Vec<f64> = img
            .data()
            .iter()
            .map(|v| (v + r.random_range(-0.01..=0.01)).clamp(0.0, 1.0))
            .collect();
        let noisy = SonarImage::new(*img.config(), noisy).unwrap();
        let d = cosine_distance(&m.describe(&img).unwrap(), &m.describe(&noisy).unwrap());
        assert!(d < 0.1, "{d}");
    }

    #[test]
    fn cosine_distance_examples() {
        let x = Descriptor::fallback();
        let mut v = vec![0.0; DESCRIPTOR_DIM];
        v[1] = 1.0;
        let y = Descriptor::from_unit(v).unwrap();
        let mut v = vec![0.0; DESCRIPTOR_DIM];
        v[0] = -1.0;
        let neg = Descriptor::from_unit(v).unwrap();
        assert_eq!(cosine_distance(&x, &x), 0.0);
        assert_eq!(cosine_distance(&x, &y), 1.0);
        assert_eq!(cosine_distance(&x, &neg), 2.0);
    }

    fn unit(v: Vec<f64>) -> Option<Descriptor> {
        match Descriptor::normalize(&v).unwrap() {
            (d, false) => Some(d),
            _ => None,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn squared_euclidean_is_twice_cosine(
            a in prop::collection::vec(-1.0f64..1.0, DESCRIPTOR_DIM),
            b in prop::collection::vec(-1.0f64..1.0, DESCRIPTOR_DIM),
        ) {
            if let (Some(x), Some(y)) = (unit(a), unit(b)) {
                let sq: f64 = x.values().iter().zip(y.values()).map(|(p, q)| (p - q).powi(2)).sum();
                prop_assert!((sq - 2.0 * cosine_distance(&x, &y)).abs() < 1e-6);
            }
        }
    }
}
