//! Cell-averaging CFAR along each beam, with the leading and trailing window
//! means combined by a pluggable statistic (smallest-of or greatest-of).

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::types::SonarImage;

/// Combines the leading and trailing reference-window means into the
/// clutter estimate for the cell under test.
pub trait CfarStatistic: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn combine(&self, leading: f64, trailing: f64) -> f64;
}

/// Smallest-of cell averaging.
#[derive(Debug, Clone, Copy, Default)]
pub struct Soca;

impl CfarStatistic for Soca {
    fn name(&self) -> &'static str {
        "soca"
    }
    fn combine(&self, leading: f64, trailing: f64) -> f64 {
        leading.min(trailing)
    }
}

/// Greatest-of cell averaging.
#[derive(Debug, Clone, Copy, Default)]
pub struct Goca;

impl CfarStatistic for Goca {
    fn name(&self) -> &'static str {
        "goca"
    }
    fn combine(&self, leading: f64, trailing: f64) -> f64 {
        leading.max(trailing)
    }
}

pub fn cfar_statistics() -> Registry<dyn CfarStatistic> {
    Registry::new("cfar mode")
        .with("soca", || Box::new(Soca) as Box<dyn CfarStatistic>)
        .with("goca", || Box::new(Goca) as Box<dyn CfarStatistic>)
}

#[derive(Debug, Clone)]
pub struct CfarParams {
    pub statistic: Arc<dyn CfarStatistic>,
    /// Reference cells per window.
    pub n_w: usize,
    pub p_fa: f64,
    /// Guard cells between the cell under test and each window.
    pub guard: usize,
}

impl CfarParams {
    pub const DEFAULT_NW: usize = 40;
    pub const DEFAULT_PFA: f64 = 0.1;
    pub const DEFAULT_GUARD: usize = 2;

    /// Build parameters, resolving `mode` through [`cfar_statistics`].
    pub fn new(mode: &str, n_w: usize, p_fa: f64, guard: usize) -> Result<Self> {
        let statistic: Arc<dyn CfarStatistic> = Arc::from(cfar_statistics().create(&mode.to_ascii_lowercase())?);
        let p = Self {
            statistic,
            n_w,
            p_fa,
            guard,
        };
        if n_w == 0 {
            return Err(Error::InvalidParam("n_w must be positive".into()));
        }
        if !(p_fa > 0.0 && p_fa < 1.0) {
            return Err(Error::InvalidParam(format!("p_fa must be in (0, 1), got {p_fa}")));
        }
        Ok(p)
    }

    pub fn with_defaults(mode: &str) -> Result<Self> {
        Self::new(mode, Self::DEFAULT_NW, Self::DEFAULT_PFA, Self::DEFAULT_GUARD)
    }

    pub fn mode(&self) -> &'static str {
        self.statistic.name()
    }

    /// Threshold multiplier for exponential clutter.
    pub fn alpha(&self) -> f64 {
        let n = self.n_w as f64;
        n * (self.p_fa.powf(-1.0 / n) - 1.0)
    }

    pub fn validate_for(&self, n_bins: usize) -> Result<()> {
        let span = 2 * (self.n_w + self.guard) + 1;
        if span > n_bins {
            return Err(Error::InvalidParam(format!(
                "cfar span 2*(n_w + guard) + 1 = {span} exceeds {n_bins} bins"
            )));
        }
        Ok(())
    }
}

/// Threshold one beam into `out` (values 0.0 / 1.0).
fn threshold_beam(beam: &[f64], p: &CfarParams, alpha: f64, out: &mut [f64]) {
    let n = beam.len();
    let (nw, g) = (p.n_w, p.guard);
    let inv = 1.0 / nw as f64;
    // lead covers [c - g - nw, c - g), trail covers (c + g, c + g + nw]
    let mut lead_sum: f64 = 0.0;
    let mut trail_sum: f64 = beam[g + 1..(g + 1 + nw).min(n)].iter().sum();
    for c in 0..n {
        if c >= g + nw {
            if c == g + nw {
                lead_sum = beam[0..nw].iter().sum();
            } else {
                lead_sum += beam[c - g - 1] - beam[c - g - nw - 1];
            }
        }
        if c > 0 && c + g + nw < n {
            trail_sum += beam[c + g + nw] - beam[c + g];
        }
        let has_lead = c >= g + nw;
        let has_trail = c + g + nw < n;
        let stat = match (has_lead, has_trail) {
            (true, true) => p.statistic.combine(lead_sum * inv, trail_sum * inv),
            (true, false) => lead_sum * inv,
            (false, true) => trail_sum * inv,
            (false, false) => unreachable!("window span checked against beam length"),
        };
        out[c] = if beam[c] > alpha * stat { 1.0 } else { 0.0 };
    }
}

/// Threshold raw row-major beams (`n_bins` per beam). Values need not lie in
/// [0, 1].
pub fn cfar_threshold_raw(data: &[f64], n_bins: usize, params: &CfarParams) -> Result<Vec<f64>> {
    params.validate_for(n_bins)?;
    if n_bins == 0 || !data.len().is_multiple_of(n_bins) {
        return Err(Error::Shape(format!(
            "{} values do not split into beams of {n_bins}",
            data.len()
        )));
    }
    let alpha = params.alpha();
    let mut out = vec![0.0; data.len()];
    for (beam, o) in data.chunks_exact(n_bins).zip(out.chunks_exact_mut(n_bins)) {
        threshold_beam(beam, params, alpha, o);
    }
    Ok(out)
}

pub fn cfar_threshold(image: &SonarImage, params: &CfarParams) -> Result<SonarImage> {
    let out = cfar_threshold_raw(image.data(), image.n_bins(), params)?;
    SonarImage::new(*image.config(), out)
}
