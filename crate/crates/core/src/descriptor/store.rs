use std::collections::BTreeMap;

use super::encoder::Tensor3;
use super::resize::resize_plane;
use crate::error::{Error, Result};
use crate::types::SonarImage;

/// Images kept at native resolution in single precision, resized to the
/// network input on demand.
#[derive(Debug, Clone, Default)]
pub struct ImageStore {
    images: BTreeMap<u32, (usize, usize, Vec<f32>)>,
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: u32, image: &SonarImage) {
        let data = image.data().iter().map(|&v| v as f32).collect();
        self.images.insert(id, (image.n_beams(), image.n_bins(), data));
    }

    pub fn contains(&self, id: u32) -> bool {
        self.images.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn input(&self, id: u32, h: usize, w: usize) -> Result<Tensor3> {
        let (rows, cols, data) = self
            .images
            .get(&id)
            .ok_or_else(|| Error::Validation(format!("no image loaded for record {id}")))?;
        let plane: Vec<f64> = data.iter().map(|&v| v as f64).collect();
        Ok(resize_plane(&plane, *rows, *cols, h, w))
    }
}
