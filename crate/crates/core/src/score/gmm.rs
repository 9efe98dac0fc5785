//! Diagonal Gaussian mixtures with closed-form smoothed scores.
//!
//! Convolving a mixture with `N(0, sigma^2 I)` adds `sigma^2` to every
//! component variance, so both the density and its gradient stay exact at
//! every noise level. Samplers are verified against these targets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::sde::VpSchedule;

use super::{ConditionStack, Denoiser};

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance.
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Component>,
    dim: usize,
}

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Domain("mixture needs at least one component".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::Domain("mixture dimension must be positive".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("mixture weights sum to {total}")));
        }
        for c in &components {
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(Error::Shape("mixture components differ in dimension".into()));
            }
            if c.weight < 0.0 || c.var.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Domain("weights must be >= 0 and variances > 0".into()));
            }
        }
        Ok(GaussianMixture { components, dim })
    }

    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        GaussianMixture::new(vec![Component {
            weight: 1.0,
            mean,
            var,
        }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Distribution of `m X` for `X` drawn from the mixture.
    pub fn scaled(&self, m: f64) -> GaussianMixture {
        GaussianMixture {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| Component {
                    weight: c.weight,
                    mean: c.mean.iter().map(|v| v * m).collect(),
                    var: c.var.iter().map(|v| v * m * m).collect(),
                })
                .collect(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.dim];
        for c in &self.components {
            for (m, cm) in mu.iter_mut().zip(&c.mean) {
                *m += c.weight * cm;
            }
        }
        mu
    }

    /// Full covariance, row-major `dim x dim`.
    pub fn covariance(&self) -> Vec<f64> {
        let mu = self.mean();
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for c in &self.components {
            for i in 0..d {
                for j in 0..d {
                    let mut v = (c.mean[i] - mu[i]) * (c.mean[j] - mu[j]);
                    if i == j {
                        v += c.var[i];
                    }
                    cov[i * d + j] += c.weight * v;
                }
            }
        }
        cov
    }

    fn log_terms(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let s2 = sigma * sigma;
        self.components
            .iter()
            .map(|c| {
                let mut lp = c.weight.ln();
                for k in 0..self.dim {
                    let v = c.var[k] + s2;
                    let d = x[k] - c.mean[k];
                    lp -= 0.5 * (d * d / v + (2.0 * std::f64::consts::PI * v).ln());
                }
                lp
            })
            .collect()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `log p_sigma(x)` for the mixture smoothed by `N(0, sigma^2 I)`.
pub fn gmm_log_density(x: &[f64], sigma: f64, gmm: &GaussianMixture) -> f64 {
    log_sum_exp(&gmm.log_terms(x, sigma))
}

/// `∇_x log p_sigma(x)` for the smoothed mixture.
pub fn gmm_score(x: &[f64], sigma: f64, gmm: &GaussianMixture) -> Vec<f64> {
    assert_eq!(x.len(), gmm.dim, "point dimension");
    let terms = gmm.log_terms(x, sigma);
    let norm = log_sum_exp(&terms);
    let s2 = sigma * sigma;
    let mut score = vec![0.0; gmm.dim];
    for (c, lt) in gmm.components.iter().zip(&terms) {
        let r = (lt - norm).exp();
        for k in 0..gmm.dim {
            score[k] -= r * (x[k] - c.mean[k]) / (c.var[k] + s2);
        }
    }
    score
}

/// Exact denoiser for a mixture target; fields hold one point per row.
#[derive(Debug, Clone)]
pub struct GmmDenoiser {
    gmm: GaussianMixture,
}

impl GmmDenoiser {
    pub fn new(gmm: GaussianMixture) -> Self {
        GmmDenoiser { gmm }
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.gmm
    }

    fn score_field(&self, x: &Field, sigma: f64, gmm: &GaussianMixture) -> Result<Field> {
        if x.width() != gmm.dim {
            return Err(Error::Shape(format!(
                "field width {} != mixture dimension {}",
                x.width(),
                gmm.dim
            )));
        }
        let mut out = Field::zeros(x.width(), x.height());
        let d = gmm.dim;
        out.data_mut()
            .par_chunks_mut(d)
            .zip(x.data().par_chunks(d))
            .with_min_len(256)
            .for_each(|(o, p)| o.copy_from_slice(&gmm_score(p, sigma, gmm)));
        Ok(out)
    }
}

impl Denoiser for GmmDenoiser {
    fn denoise(&self, x: &Field, sigma: f64, _cond: Option<&ConditionStack>) -> Result<Field> {
        // Tweedie: E[x0 | x] = x + sigma^2 ∇ log p_sigma(x)
        let s = self.score_field(x, sigma, &self.gmm)?;
        Ok(x.lincomb(1.0, &s, sigma * sigma))
    }

    fn score(
        &self,
        x: &Field,
        t: f64,
        schedule: &VpSchedule,
        _cond: Option<&ConditionStack>,
    ) -> Result<Field> {
        let m = schedule.kernel_moments(t)?;
        self.score_field(x, m.std, &self.gmm.scaled(m.mean_factor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn two_component() -> GaussianMixture {
        GaussianMixture::new(vec![
            Component {
                weight: 0.3,
                mean: vec![-1.0, 0.5],
                var: vec![0.2, 0.4],
            },
            Component {
                weight: 0.7,
                mean: vec![1.5, -0.5],
                var: vec![0.3, 0.1],
            },
        ])
        .unwrap()
    }

    #[test]
    fn standard_normal_score() {
        let g = GaussianMixture::single(vec![0.0], vec![1.0]).unwrap();
        for &x in &[-2.0, -0.3, 0.0, 1.7] {
            assert!((gmm_score(&[x], 0.0, &g)[0] + x).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothed_single_gaussian() {
        let g = GaussianMixture::single(vec![0.7], vec![0.3]).unwrap();
        let s = gmm_score(&[2.0], 0.5, &g)[0];
        assert!((s + (2.0 - 0.7) / (0.3 + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn invalid_mixtures_rejected() {
        assert!(GaussianMixture::new(vec![]).is_err());
        assert!(GaussianMixture::single(vec![0.0], vec![0.0]).is_err());
        assert!(GaussianMixture::new(vec![Component {
            weight: 0.9,
            mean: vec![0.0],
            var: vec![1.0]
        }])
        .is_err());
    }

    fn finite_difference(x: &[f64], sigma: f64, g: &GaussianMixture) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|k| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[k] += h;
                lo[k] -= h;
                (gmm_log_density(&hi, sigma, g) - gmm_log_density(&lo, sigma, g)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn score_matches_finite_difference_at_random_points() {
        let g = two_component();
        let mut r = rng::seeded(99);
        for _ in 0..100 {
            let x = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
            let sigma = r.random_range(0.0..1.5);
            let exact = gmm_score(&x, sigma, &g);
            let fd = finite_difference(&x, sigma, &g);
            for (a, b) in exact.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-2), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn mixture_moments() {
        let g = two_component();
        let mu = g.mean();
        assert!((mu[0] - (-0.3 + 0.7 * 1.5)).abs() < 1e-15);
        let cov = g.covariance();
        // Var = E[var] + Var[mean]
        let ev = 0.3 * 0.2 + 0.7 * 0.3;
        let vm = 0.3 * (-1.0 - mu[0]).powi(2) + 0.7 * (1.5 - mu[0]).powi(2);
        assert!((cov[0] - (ev + vm)).abs() < 1e-14);
        assert!(cov[1] < 0.0);
        assert_eq!(cov[1], cov[2]);
    }

    #[test]
    fn denoiser_rejects_wrong_width() {
        let d = GmmDenoiser::new(two_component());
        assert!(d.denoise(&Field::zeros(3, 2), 1.0, None).is_err());
    }
}
