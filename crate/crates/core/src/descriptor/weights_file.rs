//! Encoder weights file, little-endian:
//! `"SDPW" | version u32 | input_h u32 | input_w u32 | kernel u32 | stride u32
//!  | encoder_seed u64 | rgp_seed u64 | n_stages u32 | widths n_stages x u32`
//! followed by every parameter as f64, layer by layer, weights then biases.

use std::path::Path;

use super::encoder::{EncoderParams, EncoderWeights};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SDPW";
const VERSION: u32 = 1;

/// Serialize weights together with the projection seed they were trained with.
pub fn weights_to_bytes(weights: &EncoderWeights, rgp_seed: u64) -> Vec<u8> {
    let p = &weights.params;
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    for v in [VERSION, p.input_h as u32, p.input_w as u32, p.kernel as u32, p.stride as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&p.seed.to_le_bytes());
    out.extend_from_slice(&rgp_seed.to_le_bytes());
    out.extend_from_slice(&(p.channel_widths.len() as u32).to_le_bytes());
    for &w in &p.channel_widths {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    for v in weights.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Returns the weights and the stored projection seed.
pub fn weights_from_bytes(bytes: &[u8], path: &Path) -> Result<(EncoderWeights, u64)> {
    let fmt = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset,
        message,
    };
    let fixed = 4 + 5 * 4 + 8 + 8 + 4;
    if bytes.len() < fixed {
        return Err(fmt(bytes.len(), "truncated header".into()));
    }
    if &bytes[..4] != WEIGHTS_MAGIC {
        return Err(fmt(0, "bad magic, expected SDPW".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != VERSION as usize {
        return Err(fmt(4, format!("unsupported version {}", u32_at(4))));
    }
    let n_stages = u32_at(fixed - 4);
    let body = fixed + 4 * n_stages;
    if bytes.len() < body {
        return Err(fmt(bytes.len(), "truncated stage widths".into()));
    }
    let params = EncoderParams {
        input_h: u32_at(8),
        input_w: u32_at(12),
        kernel: u32_at(16),
        stride: u32_at(20),
        seed: u64_at(24),
        channel_widths: (0..n_stages).map(|k| u32_at(fixed + 4 * k)).collect(),
    };
    let rgp_seed = u64_at(32);
    let mut weights = EncoderWeights::zeros(&params).map_err(|e| fmt(8, e.to_string()))?;
    let needed = body + 8 * weights.param_count();
    if bytes.len() != needed {
        return Err(fmt(
            bytes.len().min(needed),
            format!("expected {needed} bytes, found {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(fmt(body + 8 * k, "non-finite parameter".into()));
    }
    weights.set_flat(&values)?;
    Ok((weights, rgp_seed))
}

pub fn write_weights(weights: &EncoderWeights, rgp_seed: u64, path: &Path) -> Result<()> {
    if !weights.is_finite() {
        return Err(Error::Validation("refusing to write non-finite weights".into()));
    }
    crate::io::write_bytes(path, &weights_to_bytes(weights, rgp_seed))
}

pub fn read_weights(path: &Path) -> Result<(EncoderWeights, u64)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    weights_from_bytes(&bytes, path)
}
