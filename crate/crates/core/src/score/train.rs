use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::loss::{draw_edm, draw_vp, NoiseDraw, TrainPair};
use super::net::{PatchNet, Scheme};
use super::precond::{edm_loss_weight, precondition_coeffs, vp_input_scale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Random pixels scored per example; `None` scores the full slice.
    pub pixels_per_example: Option<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            batch_size: 8,
            pixels_per_example: Some(512),
            learning_rate: 1e-3,
            momentum: 0.9,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.pixels_per_example == Some(0) {
            return Err(Error::Config("pixels_per_example must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.clip_norm > 0.0) {
            return Err(Error::Config(
                "need learning_rate > 0, momentum in [0, 1) and clip_norm > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub trace: Vec<LossRecord>,
    /// Per-pixel validation loss before and after training, on fixed draws.
    pub initial_validation: f64,
    pub final_validation: f64,
}

/// Loss of one example over `pixels` (all when `None`), optionally
/// accumulating its parameter gradient into `grad`.
fn example_loss(
    net: &PatchNet,
    pair: &TrainPair,
    draw: &NoiseDraw,
    pixels: Option<&[usize]>,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let cfg = net.config();
    let cond = pair.cond.as_ref();
    net.check_cond(&pair.target, cond)?;
    pair.target.ensure_same_shape(&draw.noise, "noise draw")?;
    let width = pair.target.width();
    let x0 = pair.target.data();
    let noise = draw.noise.data();

    // Per-scheme affine maps: prediction = a * x_p + b * F, residual = prediction - target.
    let (x, x_in, c_noise, skip, out_scale, weight, vp) = match cfg.scheme {
        Scheme::Kd => {
            let sigma = draw.level;
            let c = precondition_coeffs(sigma, cfg.sigma_data)?;
            let x = pair.target.lincomb(1.0, &draw.noise, sigma);
            let x_in = x.map(|v| v * c.c_in);
            (x, x_in, c.c_noise, c.c_skip, c.c_out, edm_loss_weight(sigma, cfg.sigma_data), false)
        }
        Scheme::Vp => {
            let m = cfg.vp.kernel_moments(draw.level)?;
            if m.std == 0.0 {
                return Err(Error::Domain("VP loss undefined at t = 0".into()));
            }
            let x = pair.target.lincomb(m.mean_factor, &draw.noise, m.std);
            let scale = vp_input_scale(m.mean_factor, m.std, cfg.sigma_data);
            let x_in = x.map(|v| v * scale);
            // lambda = std^2 turns the score residual into a noise residual
            (x, x_in, (m.std / m.mean_factor).ln() / 4.0, 0.0, 1.0, 1.0, true)
        }
    };

    let mut s = net.scratch();
    let mut total = 0.0;
    let all: Vec<usize>;
    let pixels = match pixels {
        Some(p) => p,
        None => {
            all = (0..pair.target.len()).collect();
            &all
        }
    };
    for &p in pixels {
        let (px, py) = (p % width, p / width);
        net.gather(&x_in, cond, c_noise, px, py, &mut s.input);
        let f = net.forward_pixel(&mut s);
        let target = if vp { noise[p] } else { x0[p] };
        let r = skip * x.data()[p] + out_scale * f - target;
        total += weight * r * r;
        if let Some(g) = grad.as_deref_mut() {
            net.backward_pixel(&mut s, 2.0 * weight * r * out_scale, g);
        }
    }
    Ok(total)
}

/// Batch loss (pixel sum, batch mean) and its exact parameter gradient.
pub fn loss_and_grad(
    net: &PatchNet,
    batch: &[TrainPair],
    draws: &[NoiseDraw],
    pixels: Option<&[Vec<usize>]>,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() || batch.len() != draws.len() {
        return Err(Error::Shape("batch and draws must be nonempty and equal length".into()));
    }
    let parts: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_iter()
        .zip(draws)
        .enumerate()
        .map(|(i, (pair, draw))| {
            let mut g = vec![0.0; net.param_count()];
            let px = pixels.map(|p| p[i].as_slice());
            let l = example_loss(net, pair, draw, px, Some(&mut g))?;
            Ok((l, g))
        })
        .collect();
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.param_count()];
    // summed in batch order so results do not depend on scheduling
    for part in parts {
        let (l, g) = part?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

fn draws_for<R: Rng + ?Sized>(net: &PatchNet, batch: &[TrainPair], rng: &mut R) -> Vec<NoiseDraw> {
    match net.config().scheme {
        Scheme::Vp => draw_vp(batch, &net.config().vp, rng),
        Scheme::Kd => draw_edm(batch, rng),
    }
}

fn per_pixel_loss(net: &PatchNet, batch: &[TrainPair], draws: &[NoiseDraw]) -> Result<f64> {
    let losses: Vec<Result<f64>> = batch
        .par_iter()
        .zip(draws)
        .map(|(p, d)| example_loss(net, p, d, None, None))
        .collect();
    let pixels: usize = batch.iter().map(|p| p.target.len()).sum();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / pixels as f64)
}

/// Momentum SGD with global gradient-norm clipping.
///
/// Each step scores a random batch (with replacement) on random pixel
/// subsets; the traced loss is the per-pixel mean of that batch before the
/// update.
pub fn train_denoiser(net: &mut PatchNet, dataset: &[TrainPair], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    let mut val_rng = rng::seeded(rng::derive_seed(config.seed, u64::MAX));
    let stride = (dataset.len() / 16).max(1);
    let val: Vec<TrainPair> = dataset.iter().step_by(stride).take(16).cloned().collect();
    let val_draws = draws_for(net, &val, &mut val_rng);
    let initial_validation = per_pixel_loss(net, &val, &val_draws)?;

    let mut r = rng::seeded(config.seed);
    let mut velocity = vec![0.0; net.param_count()];
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch: Vec<TrainPair> = (0..config.batch_size)
            .map(|_| dataset[r.random_range(0..dataset.len())].clone())
            .collect();
        let draws = draws_for(net, &batch, &mut r);
        let pixels: Vec<Vec<usize>> = batch
            .iter()
            .map(|p| match config.pixels_per_example {
                Some(k) if k < p.target.len() => (0..k).map(|_| r.random_range(0..p.target.len())).collect(),
                _ => (0..p.target.len()).collect(),
            })
            .collect();
        let (loss, mut grad) = loss_and_grad(net, &batch, &draws, Some(&pixels))?;
        let per_example = pixels.iter().map(Vec::len).sum::<usize>() as f64 / batch.len() as f64;
        let loss = loss / per_example;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step, loss });
        }
        grad.iter_mut().for_each(|g| *g /= per_example);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::TrainingDiverged { step, loss: norm });
        }
        let clip = if norm > config.clip_norm { config.clip_norm / norm } else { 1.0 };
        for ((p, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
            *v = config.momentum * *v + clip * g;
            *p -= config.learning_rate * *v;
        }
        trace.push(LossRecord { step, loss });
    }
    let final_validation = per_pixel_loss(net, &val, &val_draws)?;
    Ok(TrainReport {
        trace,
        initial_validation,
        final_validation,
    })
}

pub fn write_loss_trace(path: impl AsRef<Path>, trace: &[LossRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = String::from("step,loss\n");
    for r in trace {
        body.push_str(&format!("{},{}\n", r.step, r.loss));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}
