//! Denoising score-matching objectives for both schemes.
//!
//! Losses sum squared errors over the pixels of a slice and average over the
//! batch. The `*_with` variants take explicit noise draws so the objective is
//! a deterministic function of the model parameters.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng;
use crate::sde::{KarrasSchedule, VpSchedule};

use super::{edm_loss_weight, ConditionStack, Denoiser};

/// Log-normal training noise levels for the Karras objective.
pub const EDM_LOG_SIGMA_MEAN: f64 = -1.2;
pub const EDM_LOG_SIGMA_STD: f64 = 1.2;

/// A clean target slice and its conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub target: Field,
    pub cond: Option<ConditionStack>,
}

/// One example's noise: a VP time or Karras level, and a standard-normal field.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub level: f64,
    pub noise: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossWeight {
    /// `std^2` for VP, `(sigma^2 + sigma_data^2) / (sigma sigma_data)^2` for Karras.
    #[default]
    Standard,
    Unit,
}

fn check_batch(batch: &[TrainPair], draws: &[NoiseDraw]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Domain("loss needs a nonempty batch".into()));
    }
    if batch.len() != draws.len() {
        return Err(Error::Shape(format!(
            "{} examples but {} noise draws",
            batch.len(),
            draws.len()
        )));
    }
    for (p, d) in batch.iter().zip(draws) {
        p.target.ensure_same_shape(&d.noise, "noise draw")?;
    }
    Ok(())
}

fn noise_like<R: Rng + ?Sized>(f: &Field, rng: &mut R) -> Field {
    let mut n = Field::zeros(f.width(), f.height());
    rng::fill_standard_normal(rng, n.data_mut());
    n
}

/// `t ~ U[t_min, t_max]` and standard-normal noise per example.
pub fn draw_vp<R: Rng + ?Sized>(batch: &[TrainPair], schedule: &VpSchedule, rng: &mut R) -> Vec<NoiseDraw> {
    batch
        .iter()
        .map(|p| {
            let level = rng.random_range(schedule.t_min..=schedule.t_max);
            NoiseDraw {
                level,
                noise: noise_like(&p.target, rng),
            }
        })
        .collect()
}

/// `ln sigma ~ N(-1.2, 1.2^2)` and standard-normal noise per example.
pub fn draw_edm<R: Rng + ?Sized>(batch: &[TrainPair], rng: &mut R) -> Vec<NoiseDraw> {
    batch
        .iter()
        .map(|p| {
            let level = (EDM_LOG_SIGMA_MEAN + EDM_LOG_SIGMA_STD * rng::standard_normal(rng)).exp();
            NoiseDraw {
                level,
                noise: noise_like(&p.target, rng),
            }
        })
        .collect()
}

/// `mean_i lambda_t || s(x_t, y, t) + eps / std ||^2`.
pub fn vp_dsm_loss_with<D: Denoiser + ?Sized>(
    model: &D,
    batch: &[TrainPair],
    schedule: &VpSchedule,
    draws: &[NoiseDraw],
    weight: LossWeight,
) -> Result<f64> {
    check_batch(batch, draws)?;
    let mut total = 0.0;
    for (p, d) in batch.iter().zip(draws) {
        let m = schedule.kernel_moments(d.level)?;
        if m.std == 0.0 {
            return Err(Error::Domain("VP loss undefined at t = 0".into()));
        }
        let xt = p.target.lincomb(m.mean_factor, &d.noise, m.std);
        let s = model.score(&xt, d.level, schedule, p.cond.as_ref())?;
        let sq: f64 = s
            .data()
            .iter()
            .zip(d.noise.data())
            .map(|(g, e)| (g + e / m.std).powi(2))
            .sum();
        let lambda = match weight {
            LossWeight::Standard => m.std * m.std,
            LossWeight::Unit => 1.0,
        };
        total += lambda * sq;
    }
    Ok(total / batch.len() as f64)
}

pub fn vp_dsm_loss<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    model: &D,
    batch: &[TrainPair],
    schedule: &VpSchedule,
    rng: &mut R,
) -> Result<f64> {
    let draws = draw_vp(batch, schedule, rng);
    vp_dsm_loss_with(model, batch, schedule, &draws, LossWeight::Standard)
}

/// `mean_i lambda(sigma) || D(x0 + sigma n; sigma, y) - x0 ||^2`.
pub fn edm_loss_with<D: Denoiser + ?Sized>(
    model: &D,
    batch: &[TrainPair],
    sigma_data: f64,
    draws: &[NoiseDraw],
    weight: LossWeight,
) -> Result<f64> {
    check_batch(batch, draws)?;
    let mut total = 0.0;
    for (p, d) in batch.iter().zip(draws) {
        let x = p.target.lincomb(1.0, &d.noise, d.level);
        let out = model.denoise(&x, d.level, p.cond.as_ref())?;
        out.ensure_same_shape(&p.target, "denoiser output")?;
        let sq: f64 = out
            .data()
            .iter()
            .zip(p.target.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let lambda = match weight {
            LossWeight::Standard => edm_loss_weight(d.level, sigma_data),
            LossWeight::Unit => 1.0,
        };
        total += lambda * sq;
    }
    Ok(total / batch.len() as f64)
}

pub fn edm_loss<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    model: &D,
    batch: &[TrainPair],
    schedule: &KarrasSchedule,
    rng: &mut R,
) -> Result<f64> {
    let draws = draw_edm(batch, rng);
    edm_loss_with(model, batch, schedule.sigma_data, &draws, LossWeight::Standard)
}
