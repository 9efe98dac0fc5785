//! Conditional denoisers and score models.
//!
//! [`Denoiser`] exposes both parameterizations a sampler may need: the
//! Karras denoised estimate `D(x; sigma, y)` and the variance-preserving
//! score `s(x, y, t)`. Implementations provide one natively and convert to
//! the other through the kernel moments.

mod condition;
mod gmm;
mod loss;
mod model_io;
mod net;
mod precond;
mod train;

pub use condition::{ChannelTag, ConditionStack, Contrast, InputCombo};
pub use gmm::{gmm_log_density, gmm_score, Component, GaussianMixture, GmmDenoiser};
pub use loss::{
    draw_edm, draw_vp, edm_loss, edm_loss_with, vp_dsm_loss, vp_dsm_loss_with, LossWeight,
    NoiseDraw, TrainPair, EDM_LOG_SIGMA_MEAN, EDM_LOG_SIGMA_STD,
};
pub use model_io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use net::{NetConfig, PatchNet, Scheme};
pub use precond::{
    denoiser_forward, edm_loss_weight, precondition_coeffs, vp_input_scale, PreconditionCoeffs,
    RawNetwork,
};
pub use train::{
    loss_and_grad, train_denoiser, write_loss_trace, LossRecord, TrainConfig, TrainReport,
};

use crate::error::Result;
use crate::field::Field;
use crate::sde::VpSchedule;

pub trait Denoiser: Sync {
    /// Denoised estimate of the clean signal at noise level `sigma`.
    fn denoise(&self, x: &Field, sigma: f64, cond: Option<&ConditionStack>) -> Result<Field>;

    /// Score of the perturbed conditional density at VP time `t`.
    fn score(
        &self,
        x: &Field,
        t: f64,
        schedule: &VpSchedule,
        cond: Option<&ConditionStack>,
    ) -> Result<Field>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn denoise(&self, x: &Field, sigma: f64, cond: Option<&ConditionStack>) -> Result<Field> {
        (**self).denoise(x, sigma, cond)
    }

    fn score(
        &self,
        x: &Field,
        t: f64,
        schedule: &VpSchedule,
        cond: Option<&ConditionStack>,
    ) -> Result<Field> {
        (**self).score(x, t, schedule, cond)
    }
}

/// `score = -eps / std`.
pub fn eps_to_score(eps: &Field, std: f64) -> Field {
    eps.map(|e| -e / std)
}

/// `eps = -score * std`.
pub fn score_to_eps(score: &Field, std: f64) -> Field {
    score.map(|s| -s * std)
}

/// VP score derived from a Karras-form denoiser.
///
/// `x_t / m` is the clean signal plus noise of level `std / m`, so
/// `score = (m D(x_t / m; std / m) - x_t) / std^2`.
pub fn score_via_denoise<D: Denoiser + ?Sized>(
    den: &D,
    x: &Field,
    t: f64,
    schedule: &VpSchedule,
    cond: Option<&ConditionStack>,
) -> Result<Field> {
    let m = schedule.kernel_moments(t)?;
    if m.std == 0.0 {
        return Err(crate::Error::Domain("score is singular at t = 0".into()));
    }
    let unscaled = x.map(|v| v / m.mean_factor);
    let d = den.denoise(&unscaled, m.std / m.mean_factor, cond)?;
    let inv_var = 1.0 / (m.std * m.std);
    Ok(d.lincomb(m.mean_factor * inv_var, x, -inv_var))
}

/// Karras-form denoised estimate derived from a VP score model.
///
/// Picks the VP time whose noise-to-signal ratio equals `sigma`; then
/// `D = x + sigma^2 m s(m x, t)`.
pub fn denoise_via_score<D: Denoiser + ?Sized>(
    den: &D,
    x: &Field,
    sigma: f64,
    schedule: &VpSchedule,
    cond: Option<&ConditionStack>,
) -> Result<Field> {
    let t = schedule.time_for_ratio(sigma).min(schedule.t_max);
    let m = schedule.kernel_moments(t)?;
    let xt = x.map(|v| v * m.mean_factor);
    let s = den.score(&xt, t, schedule, cond)?;
    let ratio = m.std / m.mean_factor;
    Ok(x.lincomb(1.0, &s, ratio * ratio * m.mean_factor))
}
