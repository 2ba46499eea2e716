//! Small strided convolutional encoder with hand-written backpropagation.
//!
//! Each stage is a `kernel x kernel` convolution with zero padding
//! `kernel / 2` and stride `stride`, followed by ReLU. Features are the last
//! stage's maps flattened channel-major, then row, then column.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::resize::{INPUT_H, INPUT_W};
use crate::error::{Error, Result};
use crate::rng;

/// Dense channel x height x width array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_plane(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::Shape(format!("{} values for a {h}x{w} plane", data.len())));
        }
        Ok(Self { c: 1, h, w, data })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderParams {
    pub input_h: usize,
    pub input_w: usize,
    pub channel_widths: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub seed: u64,
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self {
            input_h: INPUT_H,
            input_w: INPUT_W,
            channel_widths: vec![8, 16, 32],
            kernel: 3,
            stride: 2,
            seed: 0,
        }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<()> {
        if self.channel_widths.is_empty() || self.channel_widths.contains(&0) {
            return Err(Error::InvalidParam("need at least one stage with positive width".into()));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!("kernel must be odd, got {}", self.kernel)));
        }
        if self.stride == 0 || self.input_h == 0 || self.input_w == 0 {
            return Err(Error::InvalidParam("stride and input size must be positive".into()));
        }
        Ok(())
    }

    /// Spatial size after every stage.
    pub fn stage_sizes(&self) -> Vec<(usize, usize)> {
        let mut hw = (self.input_h, self.input_w);
        self.channel_widths
            .iter()
            .map(|_| {
                hw = (hw.0.div_ceil(self.stride), hw.1.div_ceil(self.stride));
                hw
            })
            .collect()
    }

    pub fn feature_len(&self) -> usize {
        let (h, w) = *self.stage_sizes().last().expect("validated: at least one stage");
        self.channel_widths.last().unwrap() * h * w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[out][in][ky][kx]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub params: EncoderParams,
    pub layers: Vec<ConvLayer>,
}

impl EncoderWeights {
    /// Zero weights with the right shapes.
    pub fn zeros(params: &EncoderParams) -> Result<Self> {
        params.validate()?;
        let k2 = params.kernel * params.kernel;
        let mut in_ch = 1;
        let layers = params
            .channel_widths
            .iter()
            .map(|&out_ch| {
                let l = ConvLayer {
                    in_ch,
                    out_ch,
                    weight: vec![0.0; out_ch * in_ch * k2],
                    bias: vec![0.0; out_ch],
                };
                in_ch = out_ch;
                l
            })
            .collect();
        Ok(Self {
            params: params.clone(),
            layers,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(&l.weight);
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.param_count()
            )));
        }
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
        Ok(())
    }

    /// `self -= lr * grad`.
    pub fn apply_gradient(&mut self, grad: &EncoderWeights, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weight.iter_mut().zip(&g.weight).for_each(|(w, d)| *w -= lr * d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= lr * d);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// He-normal kernels (std = sqrt(2 / fan_in)) and zero biases.
pub fn init_encoder(params: &EncoderParams) -> Result<EncoderWeights> {
    let mut w = EncoderWeights::zeros(params)?;
    let mut r = rng::Rng::seed_from_u64(rng::derive_seed(params.seed, &[0x656e_636f]));
    let k2 = params.kernel * params.kernel;
    for l in w.layers.iter_mut() {
        let std = (2.0 / (l.in_ch * k2) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        l.weight.iter_mut().for_each(|v| *v = normal.sample(&mut r));
    }
    Ok(w)
}

/// Output index range `j` such that `j * stride + offset` lies in `0..n`.
fn valid_range(out_n: usize, n: usize, stride: usize, offset: isize) -> std::ops::Range<usize> {
    let lo = if offset >= 0 { 0 } else { ((-offset) as usize).div_ceil(stride) };
    let hi = if (n as isize) - offset <= 0 {
        0
    } else {
        ((n as isize - offset - 1) as usize / stride + 1).min(out_n)
    };
    lo..hi.max(lo)
}

/// The input plane sampled at `(i * stride + dy, j * stride + dx)` for every
/// output position, zero outside the input.
fn gather(in_plane: &[f64], h: usize, w: usize, oh: usize, ow: usize, stride: usize, dy: isize, dx: isize, buf: &mut [f64]) {
    buf.iter_mut().for_each(|v| *v = 0.0);
    let cols = valid_range(ow, w, stride, dx);
    for i in valid_range(oh, h, stride, dy) {
        let r = ((i * stride) as isize + dy) as usize;
        let src = &in_plane[r * w..(r + 1) * w];
        let dst = &mut buf[i * ow..(i + 1) * ow];
        for j in cols.clone() {
            dst[j] = src[((j * stride) as isize + dx) as usize];
        }
    }
}

/// Adjoint of [`gather`]: add `buf` back onto the input positions it was read from.
fn scatter_add(buf: &[f64], h: usize, w: usize, oh: usize, ow: usize, stride: usize, dy: isize, dx: isize, plane: &mut [f64]) {
    let cols = valid_range(ow, w, stride, dx);
    for i in valid_range(oh, h, stride, dy) {
        let r = ((i * stride) as isize + dy) as usize;
        let dst = &mut plane[r * w..(r + 1) * w];
        let src = &buf[i * ow..(i + 1) * ow];
        for j in cols.clone() {
            dst[((j * stride) as isize + dx) as usize] += src[j];
        }
    }
}

fn conv_forward(input: &Tensor3, layer: &ConvLayer, k: usize, stride: usize) -> Tensor3 {
    let (oh, ow) = (input.h.div_ceil(stride), input.w.div_ceil(stride));
    let n = oh * ow;
    let pad = (k / 2) as isize;
    let mut out = Tensor3::zeros(layer.out_ch, oh, ow);
    for o in 0..layer.out_ch {
        out.data[o * n..(o + 1) * n].iter_mut().for_each(|v| *v = layer.bias[o]);
    }
    let plane_in = input.h * input.w;
    let mut patch = vec![0.0; n];
    for c in 0..layer.in_ch {
        let in_plane = &input.data[c * plane_in..(c + 1) * plane_in];
        for ky in 0..k {
            for kx in 0..k {
                gather(in_plane, input.h, input.w, oh, ow, stride, ky as isize - pad, kx as isize - pad, &mut patch);
                for o in 0..layer.out_ch {
                    let wv = layer.weight[((o * layer.in_ch + c) * k + ky) * k + kx];
                    for (d, p) in out.data[o * n..(o + 1) * n].iter_mut().zip(&patch) {
                        *d += wv * p;
                    }
                }
            }
        }
    }
    out.data.iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Backpropagate through one conv + ReLU stage. `grad_out` is the gradient
/// w.r.t. the stage's (post-ReLU) output; parameter gradients accumulate
/// into `grad_layer`. Returns the gradient w.r.t. `input` when requested.
fn conv_backward(
    input: &Tensor3,
    output: &Tensor3,
    layer: &ConvLayer,
    k: usize,
    stride: usize,
    grad_out: &[f64],
    grad_layer: &mut ConvLayer,
    want_input_grad: bool,
) -> Option<Tensor3> {
    let n = output.h * output.w;
    let pad = (k / 2) as isize;
    let plane_in = input.h * input.w;
    let mut grad_in = want_input_grad.then(|| Tensor3::zeros(input.c, input.h, input.w));
    // ReLU mask
    let dpre: Vec<f64> = grad_out
        .iter()
        .zip(&output.data)
        .map(|(g, y)| if *y > 0.0 { *g } else { 0.0 })
        .collect();
    let live: Vec<usize> = (0..layer.out_ch)
        .filter(|&o| dpre[o * n..(o + 1) * n].iter().any(|&v| v != 0.0))
        .collect();
    for o in 0..layer.out_ch {
        grad_layer.bias[o] += dpre[o * n..(o + 1) * n].iter().sum::<f64>();
    }
    if live.is_empty() {
        return grad_in;
    }
    let (mut patch, mut gpatch) = (vec![0.0; n], vec![0.0; n]);
    for c in 0..layer.in_ch {
        let in_plane = &input.data[c * plane_in..(c + 1) * plane_in];
        for ky in 0..k {
            for kx in 0..k {
                let (dy, dx) = (ky as isize - pad, kx as isize - pad);
                gather(in_plane, input.h, input.w, output.h, output.w, stride, dy, dx, &mut patch);
                gpatch.iter_mut().for_each(|v| *v = 0.0);
                for &o in &live {
                    let widx = ((o * layer.in_ch + c) * k + ky) * k + kx;
                    let dplane = &dpre[o * n..(o + 1) * n];
                    grad_layer.weight[widx] += dplane.iter().zip(&patch).map(|(a, b)| a * b).sum::<f64>();
                    if grad_in.is_some() {
                        let wv = layer.weight[widx];
                        for (g, d) in gpatch.iter_mut().zip(dplane) {
                            *g += wv * d;
                        }
                    }
                }
                if let Some(gi) = grad_in.as_mut() {
                    let plane = &mut gi.data[c * plane_in..(c + 1) * plane_in];
                    scatter_add(&gpatch, input.h, input.w, output.h, output.w, stride, dy, dx, plane);
                }
            }
        }
    }
    grad_in
}

/// Activations kept for backpropagation: `activations[0]` is the input,
/// `activations[s + 1]` the output of stage `s`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Tensor3>,
}

impl ForwardCache {
    pub fn features(&self) -> &[f64] {
        &self.activations.last().expect("input is always cached").data
    }
}

fn check_input(input: &Tensor3, weights: &EncoderWeights) -> Result<()> {
    let p = &weights.params;
    if input.c != 1 || input.h != p.input_h || input.w != p.input_w {
        return Err(Error::Shape(format!(
            "encoder expects 1x{}x{} input, got {}x{}x{}",
            p.input_h, p.input_w, input.c, input.h, input.w
        )));
    }
    Ok(())
}

pub fn forward(input: &Tensor3, weights: &EncoderWeights) -> Result<ForwardCache> {
    check_input(input, weights)?;
    let (k, s) = (weights.params.kernel, weights.params.stride);
    let mut activations = Vec::with_capacity(weights.layers.len() + 1);
    activations.push(input.clone());
    for layer in &weights.layers {
        let next = conv_forward(activations.last().unwrap(), layer, k, s);
        activations.push(next);
    }
    Ok(ForwardCache { activations })
}

/// Flattened final feature maps.
pub fn extract_features(input: &Tensor3, weights: &EncoderWeights) -> Result<Vec<f64>> {
    check_input(input, weights)?;
    let (k, s) = (weights.params.kernel, weights.params.stride);
    let mut x = conv_forward(input, &weights.layers[0], k, s);
    for layer in &weights.layers[1..] {
        x = conv_forward(&x, layer, k, s);
    }
    Ok(x.data)
}

/// Accumulate d(loss)/d(weights) into `grads` given d(loss)/d(features).
pub fn backward(cache: &ForwardCache, weights: &EncoderWeights, grad_features: &[f64], grads: &mut EncoderWeights) {
    let (k, s) = (weights.params.kernel, weights.params.stride);
    let mut g = grad_features.to_vec();
    for idx in (0..weights.layers.len()).rev() {
        let gi = conv_backward(
            &cache.activations[idx],
            &cache.activations[idx + 1],
            &weights.layers[idx],
            k,
            s,
            &g,
            &mut grads.layers[idx],
            idx > 0,
        );
        if let Some(gi) = gi {
            g = gi.data;
        }
    }
}
