//! Multi-level separable 2-D Haar transform with soft thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SonarImage;

/// Only soft thresholding is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    #[default]
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwtParams {
    pub levels: usize,
    pub threshold_rule: ThresholdRule,
    pub threshold_scale: f64,
}

impl Default for DwtParams {
    fn default() -> Self {
        Self {
            levels: 2,
            threshold_rule: ThresholdRule::Soft,
            threshold_scale: 1.0,
        }
    }
}

impl DwtParams {
    pub fn max_levels(h: usize, w: usize) -> usize {
        let m = h.min(w);
        if m == 0 {
            0
        } else {
            (usize::BITS - 1 - m.leading_zeros()) as usize
        }
    }

    pub fn validate(&self, h: usize, w: usize) -> Result<()> {
        let max = Self::max_levels(h, w);
        if self.levels == 0 || self.levels > max {
            return Err(Error::InvalidParam(format!(
                "dwt levels {} outside 1..={max} for a {h}x{w} image",
                self.levels
            )));
        }
        if !(self.threshold_scale >= 0.0 && self.threshold_scale.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "threshold_scale must be non-negative, got {}",
                self.threshold_scale
            )));
        }
        Ok(())
    }
}

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Plane {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Plane {
    fn zeros(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            data: vec![0.0; h * w],
        }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.w + c]
    }

    /// Symmetric (half-sample) extension to even dimensions.
    fn pad_even(&self) -> Plane {
        let (h2, w2) = (self.h + self.h % 2, self.w + self.w % 2);
        if (h2, w2) == (self.h, self.w) {
            return self.clone();
        }
        let mut out = Plane::zeros(h2, w2);
        for r in 0..h2 {
            let sr = r.min(self.h - 1);
            for c in 0..w2 {
                out.data[r * w2 + c] = self.at(sr, c.min(self.w - 1));
            }
        }
        out
    }

    fn crop(&self, h: usize, w: usize) -> Plane {
        let mut out = Plane::zeros(h, w);
        for r in 0..h {
            out.data[r * w..(r + 1) * w].copy_from_slice(&self.data[r * self.w..r * self.w + w]);
        }
        out
    }
}

/// One decomposition level.
#[derive(Debug, Clone)]
pub(crate) struct Level {
    /// Size of the approximation that was decomposed, before padding.
    orig_h: usize,
    orig_w: usize,
    lh: Plane,
    hl: Plane,
    hh: Plane,
}

#[derive(Debug, Clone)]
pub(crate) struct Decomposition {
    approx: Plane,
    /// Finest level first.
    levels: Vec<Level>,
}

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn analyze(p: &Plane) -> (Plane, Level) {
    let padded = p.pad_even();
    let (h, w) = (padded.h / 2, padded.w / 2);
    let mut ll = Plane::zeros(h, w);
    let mut lh = Plane::zeros(h, w);
    let mut hl = Plane::zeros(h, w);
    let mut hh = Plane::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let a = padded.at(2 * r, 2 * c);
            let b = padded.at(2 * r, 2 * c + 1);
            let d = padded.at(2 * r + 1, 2 * c);
            let e = padded.at(2 * r + 1, 2 * c + 1);
            // rows first, then columns
            let (lo0, hi0) = ((a + b) * S, (a - b) * S);
            let (lo1, hi1) = ((d + e) * S, (d - e) * S);
            let i = r * w + c;
            ll.data[i] = (lo0 + lo1) * S;
            hl.data[i] = (lo0 - lo1) * S;
            lh.data[i] = (hi0 + hi1) * S;
            hh.data[i] = (hi0 - hi1) * S;
        }
    }
    (
        ll,
        Level {
            orig_h: p.h,
            orig_w: p.w,
            lh,
            hl,
            hh,
        },
    )
}

fn synthesize(ll: &Plane, level: &Level) -> Plane {
    let (h, w) = (ll.h, ll.w);
    let mut out = Plane::zeros(2 * h, 2 * w);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let lo0 = (ll.data[i] + level.hl.data[i]) * S;
            let lo1 = (ll.data[i] - level.hl.data[i]) * S;
            let hi0 = (level.lh.data[i] + level.hh.data[i]) * S;
            let hi1 = (level.lh.data[i] - level.hh.data[i]) * S;
            out.data[(2 * r) * 2 * w + 2 * c] = (lo0 + hi0) * S;
            out.data[(2 * r) * 2 * w + 2 * c + 1] = (lo0 - hi0) * S;
            out.data[(2 * r + 1) * 2 * w + 2 * c] = (lo1 + hi1) * S;
            out.data[(2 * r + 1) * 2 * w + 2 * c + 1] = (lo1 - hi1) * S;
        }
    }
    out.crop(level.orig_h, level.orig_w)
}

pub(crate) fn decompose(p: &Plane, levels: usize) -> Decomposition {
    let mut approx = p.clone();
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (ll, level) = analyze(&approx);
        out.push(level);
        approx = ll;
    }
    Decomposition {
        approx,
        levels: out,
    }
}

pub(crate) fn reconstruct(d: &Decomposition) -> Plane {
    d.levels
        .iter()
        .rev()
        .fold(d.approx.clone(), |ll, level| synthesize(&ll, level))
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Universal threshold from the finest diagonal subband.
pub(crate) fn universal_threshold(d: &Decomposition, n_pixels: usize, scale: f64) -> f64 {
    let finest = &d.levels[0].hh;
    let sigma = median(finest.data.iter().map(|v| v.abs()).collect()) / 0.6745;
    scale * sigma * (2.0 * (n_pixels as f64).ln()).sqrt()
}

pub fn dwt_denoise(image: &SonarImage, params: &DwtParams) -> Result<SonarImage> {
    let (h, w) = (image.n_beams(), image.n_bins());
    params.validate(h, w)?;
    let plane = Plane {
        h,
        w,
        data: image.data().to_vec(),
    };
    let mut d = decompose(&plane, params.levels);
    let t = universal_threshold(&d, h * w, params.threshold_scale);
    if t > 0.0 {
        for level in d.levels.iter_mut() {
            for band in [&mut level.lh, &mut level.hl, &mut level.hh] {
                band.data.iter_mut().for_each(|v| *v = soft(*v, t));
            }
        }
    }
    SonarImage::from_clamped(*image.config(), reconstruct(&d).data)
}
