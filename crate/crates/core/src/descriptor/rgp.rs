//! Frozen random Gaussian projection down to the descriptor dimension.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;
use crate::types::DESCRIPTOR_DIM;

/// Row-major `rows x cols` matrix with i.i.d. N(0, 1/rows) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RgpMatrix {
    rows: usize,
    cols: usize,
    seed: u64,
    data: Vec<f64>,
}

impl RgpMatrix {
    pub fn new(cols: usize, seed: u64) -> Result<Self> {
        Self::with_rows(DESCRIPTOR_DIM, cols, seed)
    }

    pub fn with_rows(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParam(format!("projection shape {rows}x{cols}")));
        }
        let mut r = rng::Rng::seed_from_u64(rng::derive_seed(seed, &[0x72_6770]));
        let normal = Normal::new(0.0, (1.0 / rows as f64).sqrt()).expect("positive std");
        let data = (0..rows * cols).map(|_| normal.sample(&mut r)).collect();
        Ok(Self { rows, cols, seed, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `M^T g`, used to push gradients back onto the features.
    pub fn transpose_mul(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.rows {
            return Err(Error::Shape(format!("{} values for {} projection rows", g.len(), self.rows)));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &gv) in self.data.chunks_exact(self.cols).zip(g) {
            if gv == 0.0 {
                continue;
            }
            out.iter_mut().zip(row).for_each(|(o, m)| *o += gv * m);
        }
        Ok(out)
    }
}

pub fn rgp_project(features: &[f64], matrix: &RgpMatrix) -> Result<Vec<f64>> {
    if features.len() != matrix.cols {
        return Err(Error::Shape(format!(
            "{} features for a projection with {} columns",
            features.len(),
            matrix.cols
        )));
    }
    Ok(matrix
        .data
        .chunks_exact(matrix.cols)
        .map(|row| row.iter().zip(features).map(|(m, f)| m * f).sum())
        .collect())
}
