//! Variance-preserving predictor-corrector sampling.
//!
//! The predictor is an Euler-Maruyama step of the reverse-time SDE
//! `dx = [f(x, t) - g(t)^2 s(x, y, t)] dt + g(t) dw` integrated from
//! `t_max` down to `t_min` on a uniform grid. After each predictor step,
//! `M` Langevin corrector steps use the step size
//! `eps = 2 r^2 (||z|| / ||g||)^2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng;
use crate::score::{ConditionStack, Denoiser};
use crate::sde::VpSchedule;

use super::{Progress, ProgressFn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcSamplerConfig {
    pub n_predictor_steps: usize,
    pub n_corrector_steps: usize,
    pub snr: f64,
    pub schedule: VpSchedule,
    pub seed: u64,
}

impl Default for PcSamplerConfig {
    fn default() -> Self {
        PcSamplerConfig {
            n_predictor_steps: 250,
            n_corrector_steps: 1,
            snr: 0.16,
            schedule: VpSchedule::default(),
            seed: 0,
        }
    }
}

impl PcSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_predictor_steps == 0 {
            return Err(Error::Config("need at least one predictor step".into()));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Config(format!("corrector snr must be positive, got {}", self.snr)));
        }
        self.schedule.validate()
    }
}

/// Langevin step size `2 r^2 (||z|| / ||g||)^2`.
pub fn corrector_step_size(z_norm: f64, g_norm: f64, snr: f64) -> f64 {
    2.0 * snr * snr * (z_norm / g_norm).powi(2)
}

/// One Langevin correction `x <- x + eps g + sqrt(2 eps) z`.
///
/// Returns the step size, or `None` when `g` is zero and the step is skipped.
pub fn corrector_step<R: Rng + ?Sized>(x: &mut Field, g: &Field, snr: f64, rng: &mut R) -> Option<f64> {
    let mut z = Field::zeros(x.width(), x.height());
    rng::fill_standard_normal(rng, z.data_mut());
    let g_norm = g.norm();
    if g_norm == 0.0 {
        log::warn!("corrector skipped: score has zero norm");
        return None;
    }
    let eps = corrector_step_size(z.norm(), g_norm, snr);
    let noise = (2.0 * eps).sqrt();
    for ((xi, gi), zi) in x.data_mut().iter_mut().zip(g.data()).zip(z.data()) {
        *xi += eps * gi + noise * zi;
    }
    Some(eps)
}

/// Starts from `N(0, I)` drawn with `config.seed`.
pub fn pc_sample<D: Denoiser + ?Sized>(
    model: &D,
    cond: Option<&ConditionStack>,
    shape: (usize, usize),
    config: &PcSamplerConfig,
) -> Result<Field> {
    config.validate()?;
    let mut r = rng::seeded(config.seed);
    let mut x = Field::zeros(shape.0, shape.1);
    rng::fill_standard_normal(&mut r, x.data_mut());
    pc_sample_from(model, cond, x, config, &mut r, None)
}

pub fn pc_sample_from<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    model: &D,
    cond: Option<&ConditionStack>,
    mut x: Field,
    config: &PcSamplerConfig,
    rng: &mut R,
    progress: Option<ProgressFn<'_>>,
) -> Result<Field> {
    config.validate()?;
    let s = &config.schedule;
    let n = config.n_predictor_steps;
    let dt = (s.t_max - s.t_min) / n as f64;
    let mut z = Field::zeros(x.width(), x.height());
    for (step, k) in (0..n).rev().enumerate() {
        let t = s.t_min + (k + 1) as f64 * dt;
        let t_next = if k == 0 { s.t_min } else { s.t_min + k as f64 * dt };
        let score = model.score(&x, t, s, cond)?;
        score.ensure_same_shape(&x, "score")?;
        rng::fill_standard_normal(rng, z.data_mut());
        let beta = s.beta(t);
        let g = beta.sqrt() * dt.sqrt();
        // x_{t-dt} = x - [f - g^2 score] dt + g sqrt(dt) z, with f = -beta x / 2
        for ((xi, si), zi) in x.data_mut().iter_mut().zip(score.data()).zip(z.data()) {
            *xi += (0.5 * beta * *xi + beta * si) * dt + g * zi;
        }
        if !x.is_finite() {
            return Err(Error::Diverged { step });
        }
        for _ in 0..config.n_corrector_steps {
            let g = model.score(&x, t_next, s, cond)?;
            corrector_step(&mut x, &g, config.snr, rng);
            if !x.is_finite() {
                return Err(Error::Diverged { step });
            }
        }
        if let Some(report) = progress {
            report(Progress {
                step,
                total: n,
                level: t_next,
            });
        }
    }
    Ok(x)
}
