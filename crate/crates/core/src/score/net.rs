//! A small patch-wise perceptron denoiser with hand-written backprop.
//!
//! Each output pixel sees a `patch x patch` neighbourhood of the scaled noisy
//! slice and of every condition channel (edge-replicated), plus the scalar
//! noise embedding. Conditioning is plain channel concatenation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng;
use crate::sde::VpSchedule;

use super::precond::{denoiser_forward, vp_input_scale, RawNetwork};
use super::{denoise_via_score, score_via_denoise, ConditionStack, Denoiser};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Variance-preserving SDE; the network predicts the injected noise.
    #[serde(rename = "sgm-vp")]
    Vp,
    /// Karras preconditioned denoiser.
    #[serde(rename = "sgm-kd")]
    Kd,
}

impl Scheme {
    /// Intensity range the scheme's training data is normalized to.
    pub fn data_range(self) -> (f64, f64) {
        match self {
            Scheme::Vp => (0.0, 1.0),
            Scheme::Kd => (-1.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Vp => "sgm-vp",
            Scheme::Kd => "sgm-kd",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgm-vp" | "vp" => Ok(Scheme::Vp),
            "sgm-kd" | "kd" => Ok(Scheme::Kd),
            _ => Err(Error::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub scheme: Scheme,
    /// Odd edge length of the pixel neighbourhood.
    pub patch: usize,
    pub cond_channels: usize,
    pub hidden: Vec<usize>,
    pub sigma_data: f64,
    pub vp: VpSchedule,
}

impl NetConfig {
    pub fn new(scheme: Scheme, cond_channels: usize) -> Self {
        NetConfig {
            scheme,
            patch: 3,
            cond_channels,
            hidden: vec![32, 32],
            sigma_data: 0.5,
            vp: VpSchedule::default(),
        }
    }

    pub fn input_dim(&self) -> usize {
        (1 + self.cond_channels) * self.patch * self.patch + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch.is_multiple_of(2) || self.patch == 0 {
            return Err(Error::Config(format!("patch size must be odd, got {}", self.patch)));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if !(self.sigma_data > 0.0) {
            return Err(Error::Config("sigma_data must be positive".into()));
        }
        self.vp.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchNet {
    config: NetConfig,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

fn layout(config: &NetConfig) -> (Vec<Layer>, usize) {
    let mut widths = vec![config.input_dim()];
    widths.extend(&config.hidden);
    widths.push(1);
    let mut offset = 0;
    let layers = widths
        .windows(2)
        .map(|w| {
            let l = Layer {
                inputs: w[0],
                outputs: w[1],
                w: offset,
                b: offset + w[0] * w[1],
            };
            offset = l.b + l.outputs;
            l
        })
        .collect();
    (layers, offset)
}

/// Dot product with four independent accumulators so it vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-pixel scratch space for a forward/backward pass.
pub(crate) struct Scratch {
    pub input: Vec<f64>,
    hidden: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl PatchNet {
    /// Xavier-uniform weights and zero biases, rounded to `f32` so a saved
    /// model reloads bit-identically.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layers, count) = layout(&config);
        let mut params = vec![0.0; count];
        let mut r = rng::seeded(seed);
        for l in &layers {
            let a = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for p in &mut params[l.w..l.b] {
                *p = r.random_range(-a..a) as f32 as f64;
            }
        }
        Ok(PatchNet {
            config,
            layers,
            params,
        })
    }

    pub fn from_params(config: NetConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let (layers, count) = layout(&config);
        if params.len() != count {
            return Err(Error::Format(format!(
                "{} parameters for a network with {count}",
                params.len()
            )));
        }
        Ok(PatchNet {
            config,
            layers,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `(outputs, inputs)` of every dense layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.outputs, l.inputs)).collect()
    }

    pub(crate) fn scratch(&self) -> Scratch {
        let widest = self.layers.iter().map(|l| l.outputs.max(l.inputs)).max().unwrap();
        Scratch {
            input: vec![0.0; self.config.input_dim()],
            hidden: self.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
        }
    }

    pub(crate) fn check_cond(&self, x: &Field, cond: Option<&ConditionStack>) -> Result<()> {
        let n = cond.map_or(0, |c| c.len());
        if n != self.config.cond_channels {
            return Err(Error::Shape(format!(
                "network expects {} condition channels, got {n}",
                self.config.cond_channels
            )));
        }
        if let Some(c) = cond {
            if c.shape() != x.shape() {
                return Err(Error::Shape(format!(
                    "conditions {:?} vs slice {:?}",
                    c.shape(),
                    x.shape()
                )));
            }
        }
        Ok(())
    }

    /// Fills `buf` with the network input for pixel `(px, py)`.
    pub(crate) fn gather(
        &self,
        x_in: &Field,
        cond: Option<&ConditionStack>,
        c_noise: f64,
        px: usize,
        py: usize,
        buf: &mut [f64],
    ) {
        let r = (self.config.patch / 2) as isize;
        let (px, py) = (px as isize, py as isize);
        let mut k = 0;
        let channels = std::iter::once(x_in).chain(cond.into_iter().flat_map(|c| c.channels()));
        for f in channels {
            for dy in -r..=r {
                for dx in -r..=r {
                    buf[k] = f.get_clamped(px + dx, py + dy);
                    k += 1;
                }
            }
        }
        buf[k] = c_noise;
    }

    /// Forward pass on `s.input`; hidden activations stay in `s` for backprop.
    pub(crate) fn forward_pixel(&self, s: &mut Scratch) -> f64 {
        let n = self.layers.len();
        for (li, l) in self.layers.iter().enumerate() {
            let (before, rest) = s.hidden.split_at_mut(li);
            let prev: &[f64] = if li == 0 { &s.input } else { &before[li - 1] };
            let out = &mut rest[0];
            let w = &self.params[l.w..l.b];
            let b = &self.params[l.b..l.b + l.outputs];
            for o in 0..l.outputs {
                let row = &w[o * l.inputs..(o + 1) * l.inputs];
                let z = b[o] + dot(row, prev);
                out[o] = if li + 1 == n { z } else { z.tanh() };
            }
        }
        s.hidden[n - 1][0]
    }

    /// Adds `dout * dF/dθ` for the pixel last passed through `forward_pixel`.
    pub(crate) fn backward_pixel(&self, s: &mut Scratch, dout: f64, grad: &mut [f64]) {
        s.delta.clear();
        s.delta.push(dout);
        for li in (0..self.layers.len()).rev() {
            let l = self.layers[li];
            let prev: &[f64] = if li == 0 { &s.input } else { &s.hidden[li - 1] };
            for o in 0..l.outputs {
                let d = s.delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[l.b + o] += d;
                let g = &mut grad[l.w + o * l.inputs..l.w + (o + 1) * l.inputs];
                for (gi, p) in g.iter_mut().zip(prev) {
                    *gi += d * p;
                }
            }
            if li == 0 {
                break;
            }
            s.delta_prev.clear();
            s.delta_prev.resize(l.inputs, 0.0);
            let w = &self.params[l.w..l.b];
            for o in 0..l.outputs {
                let d = s.delta[o];
                let row = &w[o * l.inputs..(o + 1) * l.inputs];
                for (dp, wi) in s.delta_prev.iter_mut().zip(row) {
                    *dp += d * wi;
                }
            }
            for (dp, h) in s.delta_prev.iter_mut().zip(prev) {
                *dp *= 1.0 - h * h;
            }
            std::mem::swap(&mut s.delta, &mut s.delta_prev);
        }
    }

    /// Predicted noise for a VP-perturbed slice.
    pub fn predict_noise(
        &self,
        x: &Field,
        t: f64,
        schedule: &VpSchedule,
        cond: Option<&ConditionStack>,
    ) -> Result<Field> {
        let m = schedule.kernel_moments(t)?;
        if m.std == 0.0 {
            return Err(Error::Domain("noise prediction undefined at t = 0".into()));
        }
        let scale = vp_input_scale(m.mean_factor, m.std, self.config.sigma_data);
        let x_in = x.map(|v| v * scale);
        self.raw_forward(&x_in, (m.std / m.mean_factor).ln() / 4.0, cond)
    }
}

impl RawNetwork for PatchNet {
    fn raw_forward(&self, x_in: &Field, c_noise: f64, cond: Option<&ConditionStack>) -> Result<Field> {
        self.check_cond(x_in, cond)?;
        let (w, h) = x_in.shape();
        let mut out = Field::zeros(w, h);
        out.data_mut()
            .par_chunks_mut(w)
            .enumerate()
            .for_each_init(
                || self.scratch(),
                |s, (py, row)| {
                    for (px, o) in row.iter_mut().enumerate() {
                        let mut input = std::mem::take(&mut s.input);
                        self.gather(x_in, cond, c_noise, px, py, &mut input);
                        s.input = input;
                        *o = self.forward_pixel(s);
                    }
                },
            );
        Ok(out)
    }
}

impl Denoiser for PatchNet {
    fn denoise(&self, x: &Field, sigma: f64, cond: Option<&ConditionStack>) -> Result<Field> {
        match self.config.scheme {
            Scheme::Kd => denoiser_forward(self, x, sigma, self.config.sigma_data, cond),
            Scheme::Vp => denoise_via_score(self, x, sigma, &self.config.vp, cond),
        }
    }

    fn score(
        &self,
        x: &Field,
        t: f64,
        schedule: &VpSchedule,
        cond: Option<&ConditionStack>,
    ) -> Result<Field> {
        match self.config.scheme {
            Scheme::Vp => {
                let std = schedule.kernel_moments(t)?.std;
                let eps = self.predict_noise(x, t, schedule, cond)?;
                Ok(super::eps_to_score(&eps, std))
            }
            Scheme::Kd => score_via_denoise(self, x, t, schedule, cond),
        }
    }
}
