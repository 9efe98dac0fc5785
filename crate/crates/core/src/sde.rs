//! Noise schedules and forward perturbation kernels.
//!
//! The variance-preserving scheme uses a linear rate `beta(t)` whose integral
//! has a closed form, so kernel moments are exact. The Karras schedule is a
//! plain decreasing sequence of noise levels with a terminal zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VpSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for VpSchedule {
    fn default() -> Self {
        VpSchedule {
            beta_min: 0.1,
            beta_max: 20.0,
            t_min: 1e-3,
            t_max: 1.0,
        }
    }
}

/// Mean scale and standard deviation of `p(x_t | x_0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    pub mean_factor: f64,
    pub std: f64,
}

impl VpSchedule {
    pub fn validate(&self) -> Result<()> {
        // A constant rate (beta_min == beta_max) is allowed.
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max && self.beta_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < beta_min <= beta_max, got {} and {}",
                self.beta_min, self.beta_max
            )));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < t_min < t_max <= 1, got {} and {}",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + t * (self.beta_max - self.beta_min)
    }

    /// `∫_0^t beta(s) ds`.
    pub fn integrated_beta(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t
    }

    /// Forward drift coefficient: `f(x, t) = -beta(t) x / 2`.
    pub fn drift_coeff(&self, t: f64) -> f64 {
        -0.5 * self.beta(t)
    }

    /// Diffusion coefficient `g(t) = sqrt(beta(t))`.
    pub fn diffusion(&self, t: f64) -> f64 {
        self.beta(t).sqrt()
    }

    pub fn kernel_moments(&self, t: f64) -> Result<KernelMoments> {
        if !(0.0..=self.t_max).contains(&t) {
            return Err(Error::Domain(format!(
                "t = {t} outside [0, {}]",
                self.t_max
            )));
        }
        let b = self.integrated_beta(t);
        Ok(KernelMoments {
            mean_factor: (-0.5 * b).exp(),
            std: (-(-b).exp_m1()).sqrt(),
        })
    }

    /// Time at which the kernel's noise-to-signal ratio `std / mean_factor`
    /// equals `ratio`; the inverse of the VP-to-Karras level mapping.
    pub fn time_for_ratio(&self, ratio: f64) -> f64 {
        let b = (ratio * ratio).ln_1p();
        let a = 0.5 * (self.beta_max - self.beta_min);
        if a.abs() < 1e-15 {
            return b / self.beta_min;
        }
        (-self.beta_min + (self.beta_min * self.beta_min + 4.0 * a * b).sqrt()) / (2.0 * a)
    }
}

pub fn vp_kernel_moments(schedule: &VpSchedule, t: f64) -> Result<KernelMoments> {
    schedule.kernel_moments(t)
}

/// Draws `x_t = mean_factor * x0 + std * eps`; returns `(x_t, eps)`.
pub fn vp_perturb<R: rand::Rng + ?Sized>(
    x0: &Field,
    t: f64,
    schedule: &VpSchedule,
    rng: &mut R,
) -> Result<(Field, Field)> {
    if t <= 0.0 {
        return Err(Error::Domain(format!("perturbation time must be positive, got {t}")));
    }
    let m = schedule.kernel_moments(t)?;
    let mut eps = Field::zeros(x0.width(), x0.height());
    rng::fill_standard_normal(rng, eps.data_mut());
    Ok((x0.lincomb(m.mean_factor, &eps, m.std), eps))
}

/// Exact score of the perturbation kernel, `-(x_t - mean_factor x0) / std^2`.
pub fn vp_true_score(x_t: &Field, x0: &Field, t: f64, schedule: &VpSchedule) -> Result<Field> {
    x_t.ensure_same_shape(x0, "true score")?;
    let m = schedule.kernel_moments(t)?;
    if m.std == 0.0 {
        return Err(Error::Domain("score is singular at t = 0".into()));
    }
    let inv_var = 1.0 / (m.std * m.std);
    Ok(x_t.lincomb(-inv_var, x0, m.mean_factor * inv_var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KarrasSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub n_steps: usize,
    pub sigma_data: f64,
}

impl Default for KarrasSchedule {
    fn default() -> Self {
        KarrasSchedule {
            sigma_min: 0.002,
            sigma_max: 80.0,
            rho: 7.0,
            n_steps: 100,
            sigma_data: 0.5,
        }
    }
}

impl KarrasSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max) {
            return Err(Error::Config(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            )));
        }
        if !(self.rho > 0.0) || self.n_steps < 2 || !(self.sigma_data > 0.0) {
            return Err(Error::Config(
                "need rho > 0, n_steps >= 2 and sigma_data > 0".into(),
            ));
        }
        Ok(())
    }

    /// `n_steps` levels from `sigma_max` down to `sigma_min`, then `0`.
    pub fn sigma_steps(&self) -> Vec<f64> {
        let inv_rho = 1.0 / self.rho;
        let hi = self.sigma_max.powf(inv_rho);
        let lo = self.sigma_min.powf(inv_rho);
        let last = (self.n_steps - 1) as f64;
        let mut steps: Vec<f64> = (0..self.n_steps)
            .map(|i| (hi + i as f64 / last * (lo - hi)).powf(self.rho))
            .collect();
        // pin the endpoints against powf round-off
        steps[0] = self.sigma_max;
        steps[self.n_steps - 1] = self.sigma_min;
        steps.push(0.0);
        steps
    }
}

pub fn karras_sigma_steps(schedule: &KarrasSchedule) -> Result<Vec<f64>> {
    schedule.validate()?;
    Ok(schedule.sigma_steps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_time_is_identity() {
        let m = vp_kernel_moments(&VpSchedule::default(), 0.0).unwrap();
        assert_eq!(m.mean_factor, 1.0);
        assert_eq!(m.std, 0.0);
    }

    #[test]
    fn constant_rate_moments() {
        // independently evaluated: exp(-1), sqrt(1 - exp(-2))
        let s = VpSchedule {
            beta_min: 2.0,
            beta_max: 2.0,
            ..Default::default()
        };
        let m = vp_kernel_moments(&s, 1.0).unwrap();
        assert!((m.mean_factor - 0.36787944117144233).abs() < 1e-14);
        assert!((m.std - 0.9298734950321937).abs() < 1e-14);
    }

    #[test]
    fn default_schedule_endpoint_moments() {
        let s = VpSchedule::default();
        assert!((s.integrated_beta(1.0) - 10.05).abs() < 1e-12);
        let m = vp_kernel_moments(&s, 1.0).unwrap();
        assert!((m.mean_factor - 0.006571586494929619).abs() < 1e-12);
        assert!((m.std - 0.9999784068923386).abs() < 1e-12);
    }

    #[test]
    fn time_outside_domain_is_rejected() {
        let s = VpSchedule::default();
        assert!(vp_kernel_moments(&s, -0.1).is_err());
        assert!(vp_kernel_moments(&s, 1.5).is_err());
        let x0 = Field::zeros(2, 2);
        assert!(vp_perturb(&x0, 0.0, &s, &mut rng::seeded(0)).is_err());
        assert!(vp_true_score(&x0, &x0, 0.0, &s).is_err());
    }

    #[test]
    fn perturb_is_deterministic_and_vanishes_near_zero() {
        let s = VpSchedule {
            t_min: 1e-9,
            ..Default::default()
        };
        let x0 = Field::from_vec(3, 1, vec![0.2, 0.5, 0.9]).unwrap();
        let (a, ea) = vp_perturb(&x0, 1e-9, &s, &mut rng::seeded(11)).unwrap();
        let (b, eb) = vp_perturb(&x0, 1e-9, &s, &mut rng::seeded(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ea, eb);
        for (xt, x) in a.data().iter().zip(x0.data()) {
            assert!((xt - x).abs() < 1e-4);
        }
    }

    #[test]
    fn true_score_special_cases() {
        let s = VpSchedule::default();
        let t = 0.4;
        let m = s.kernel_moments(t).unwrap();
        let x0 = Field::from_vec(2, 2, vec![0.1, -0.3, 0.7, 1.0]).unwrap();
        let at_mean = x0.map(|v| v * m.mean_factor);
        let score = vp_true_score(&at_mean, &x0, t, &s).unwrap();
        assert!(score.data().iter().all(|v| v.abs() < 1e-12));

        let unit = at_mean.map(|v| v + m.std);
        let score = vp_true_score(&unit, &x0, t, &s).unwrap();
        for v in score.data() {
            assert!((v + 1.0 / m.std).abs() < 1e-9);
        }
    }

    #[test]
    fn sigma_steps_examples() {
        let k = KarrasSchedule {
            n_steps: 2,
            ..Default::default()
        };
        assert_eq!(karras_sigma_steps(&k).unwrap(), vec![80.0, 0.002, 0.0]);
        let k = KarrasSchedule {
            n_steps: 3,
            ..Default::default()
        };
        let s = karras_sigma_steps(&k).unwrap();
        // (80^(1/7) + (0.002^(1/7) - 80^(1/7)) / 2)^7 evaluated independently
        assert!((s[1] - 2.515218976147159).abs() < 1e-9, "{}", s[1]);
        assert!(karras_sigma_steps(&KarrasSchedule { n_steps: 1, ..k }).is_err());
    }

    #[test]
    fn ratio_inverse_matches_moments() {
        let s = VpSchedule::default();
        for &t in &[0.01, 0.2, 0.5, 0.9] {
            let m = s.kernel_moments(t).unwrap();
            let back = s.time_for_ratio(m.std / m.mean_factor);
            assert!((back - t).abs() < 1e-10, "{t} -> {back}");
        }
    }

    proptest! {
        #[test]
        fn variance_preserving_and_monotone(t in 1e-3f64..1.0, dt in 1e-4f64..1e-2) {
            let s = VpSchedule::default();
            let a = s.kernel_moments(t).unwrap();
            prop_assert!(a.mean_factor.powi(2) + a.std.powi(2) <= 1.0 + 1e-12);
            prop_assert!(a.mean_factor > 0.0 && a.mean_factor <= 1.0);
            let t2 = (t + dt).min(1.0);
            if t2 > t {
                let b = s.kernel_moments(t2).unwrap();
                prop_assert!(b.mean_factor < a.mean_factor);
                prop_assert!(b.std > a.std);
            }
        }

        #[test]
        fn score_recovers_noise(seed in any::<u64>(), t in 1e-3f64..1.0) {
            let s = VpSchedule::default();
            let x0 = Field::from_vec(4, 3, (0..12).map(|i| i as f64 / 12.0).collect()).unwrap();
            let (xt, eps) = vp_perturb(&x0, t, &s, &mut rng::seeded(seed)).unwrap();
            let score = vp_true_score(&xt, &x0, t, &s).unwrap();
            let std = s.kernel_moments(t).unwrap().std;
            for (g, e) in score.data().iter().zip(eps.data()) {
                let rec = -g * std;
                prop_assert!((rec - e).abs() <= 1e-6 * e.abs().max(1.0));
            }
        }

        #[test]
        fn sigma_steps_strictly_decreasing(n in 2usize..200, rho in 0.5f64..12.0,
                                           lo in 1e-4f64..0.1, span in 1.0f64..200.0) {
            let k = KarrasSchedule { sigma_min: lo, sigma_max: lo + span, rho, n_steps: n, sigma_data: 0.5 };
            let s = karras_sigma_steps(&k).unwrap();
            prop_assert_eq!(s.len(), n + 1);
            prop_assert_eq!(*s.last().unwrap(), 0.0);
            for w in s.windows(2) {
                prop_assert!(w[0] > w[1]);
            }
            for v in &s[..n] {
                prop_assert!(*v >= k.sigma_min && *v <= k.sigma_max);
            }
        }
    }
}
