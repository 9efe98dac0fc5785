use crate::error::{Error, Result};
use crate::field::Field;

use super::ConditionStack;

/// Noise-level dependent scalings around the raw network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreconditionCoeffs {
    pub c_skip: f64,
    pub c_out: f64,
    pub c_in: f64,
    pub c_noise: f64,
}

pub fn precondition_coeffs(sigma: f64, sigma_data: f64) -> Result<PreconditionCoeffs> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("noise level must be positive, got {sigma}")));
    }
    if !(sigma_data > 0.0) {
        return Err(Error::Domain(format!("sigma_data must be positive, got {sigma_data}")));
    }
    let sd2 = sigma_data * sigma_data;
    let total = sigma * sigma + sd2;
    let root = total.sqrt();
    Ok(PreconditionCoeffs {
        c_skip: sd2 / total,
        c_out: sigma * sigma_data / root,
        c_in: 1.0 / root,
        c_noise: sigma.ln() / 4.0,
    })
}

/// `lambda(sigma) = (sigma^2 + sigma_data^2) / (sigma sigma_data)^2`, which
/// makes the effective target of the raw network unit-weighted.
pub fn edm_loss_weight(sigma: f64, sigma_data: f64) -> f64 {
    (sigma * sigma + sigma_data * sigma_data) / (sigma * sigma_data).powi(2)
}

/// Input scale for the VP noise predictor: `1 / sqrt(m^2 sigma_data^2 + std^2)`,
/// the inverse standard deviation of `x_t` for data of scale `sigma_data`.
pub fn vp_input_scale(mean_factor: f64, std: f64, sigma_data: f64) -> f64 {
    1.0 / (mean_factor * mean_factor * sigma_data * sigma_data + std * std).sqrt()
}

/// The raw network `F(c_in x; c_noise, y)`.
pub trait RawNetwork: Sync {
    fn raw_forward(&self, x_in: &Field, c_noise: f64, cond: Option<&ConditionStack>)
        -> Result<Field>;
}

impl<F> RawNetwork for F
where
    F: Fn(&Field, f64, Option<&ConditionStack>) -> Result<Field> + Sync,
{
    fn raw_forward(&self, x_in: &Field, c_noise: f64, cond: Option<&ConditionStack>) -> Result<Field> {
        self(x_in, c_noise, cond)
    }
}

/// `D(x; sigma, y) = c_skip x + c_out F(c_in x; c_noise, y)`.
pub fn denoiser_forward<N: RawNetwork + ?Sized>(
    raw: &N,
    x: &Field,
    sigma: f64,
    sigma_data: f64,
    cond: Option<&ConditionStack>,
) -> Result<Field> {
    let c = precondition_coeffs(sigma, sigma_data)?;
    if let Some(cond) = cond {
        if cond.shape() != x.shape() {
            return Err(Error::Shape(format!(
                "conditions {:?} vs noisy input {:?}",
                cond.shape(),
                x.shape()
            )));
        }
    }
    let x_in = x.map(|v| v * c.c_in);
    let f = raw.raw_forward(&x_in, c.c_noise, cond)?;
    f.ensure_same_shape(x, "raw network output")?;
    Ok(x.lincomb(c.c_skip, &f, c.c_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    #[allow(clippy::approx_constant)]
    fn coefficients_at_data_scale() {
        // sigma = sigma_data = 0.5: 0.5, 0.25/sqrt(0.5), 1/sqrt(0.5), ln(0.5)/4
        let c = precondition_coeffs(0.5, 0.5).unwrap();
        assert!((c.c_skip - 0.5).abs() < 1e-15);
        assert!((c.c_out - 0.35355339059327373).abs() < 1e-14);
        assert!((c.c_in - 1.4142135623730951).abs() < 1e-14);
        assert!((c.c_noise + 0.17328679513998632).abs() < 1e-14);
    }

    #[test]
    fn coefficient_limits() {
        let big = precondition_coeffs(1e6, 0.5).unwrap();
        assert!(big.c_skip < 1e-12);
        assert!((big.c_out - 0.5).abs() < 1e-9);
        let small = precondition_coeffs(1e-6, 0.5).unwrap();
        assert!((small.c_skip - 1.0).abs() < 1e-11);
        assert!(small.c_out < 2e-6);
        assert!(precondition_coeffs(0.0, 0.5).is_err());
        assert!(precondition_coeffs(-1.0, 0.5).is_err());
    }

    #[test]
    fn coefficients_bounded_on_log_grid() {
        let sd = 0.5;
        let mut prev: Option<PreconditionCoeffs> = None;
        for i in 0..=800 {
            let sigma = 10f64.powf(-4.0 + i as f64 * 0.01);
            let c = precondition_coeffs(sigma, sd).unwrap();
            assert!(c.c_skip > 0.0 && c.c_skip < 1.0);
            assert!(c.c_out <= sigma.min(sd) * 2f64.sqrt());
            assert!(c.c_in.is_finite() && c.c_noise.is_finite());
            if let Some(p) = prev {
                // adjacent grid points are 2.3 % apart in sigma
                assert!((c.c_skip - p.c_skip).abs() < 0.03);
                assert!((c.c_out - p.c_out).abs() < 0.03 * sd);
            }
            prev = Some(c);
        }
    }

    #[test]
    fn zero_network_returns_skip_term() {
        let zero = |x: &Field, _: f64, _: Option<&ConditionStack>| Ok(Field::zeros(x.width(), x.height()));
        let x = Field::from_vec(3, 1, vec![1.0, -2.0, 4.0]).unwrap();
        let d = denoiser_forward(&zero, &x, 0.5, 0.5, None).unwrap();
        assert_eq!(d.data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn constant_network_is_affine() {
        let constant = |x: &Field, _: f64, _: Option<&ConditionStack>| Ok(Field::filled(x.width(), x.height(), 0.7));
        let x = Field::from_vec(2, 1, vec![0.3, -1.1]).unwrap();
        let c = precondition_coeffs(1.3, 0.5).unwrap();
        let d = denoiser_forward(&constant, &x, 1.3, 0.5, None).unwrap();
        for (out, xi) in d.data().iter().zip(x.data()) {
            assert!((out - (c.c_skip * xi + c.c_out * 0.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_output_shape_is_rejected() {
        let bad = |_: &Field, _: f64, _: Option<&ConditionStack>| Ok(Field::zeros(1, 1));
        let x = Field::zeros(2, 2);
        assert!(denoiser_forward(&bad, &x, 1.0, 0.5, None).is_err());
    }

    /// The analytic optimum for a standard-normal target (sigma_data = 1)
    /// yields the posterior mean x / (1 + sigma^2); checked against a
    /// self-normalized Monte-Carlo posterior-mean estimate.
    #[test]
    fn optimal_network_gives_gaussian_posterior_mean() {
        let sd = 1.0;
        let optimum = move |x_in: &Field, c_noise: f64, _: Option<&ConditionStack>| {
            let sigma = (4.0 * c_noise).exp();
            let c = precondition_coeffs(sigma, sd)?;
            Ok(x_in.map(|u| {
                let x = u / c.c_in;
                (x / (1.0 + sigma * sigma) - c.c_skip * x) / c.c_out
            }))
        };
        let mut r = rng::seeded(5);
        let prior: Vec<f64> = (0..400_000).map(|_| rng::standard_normal(&mut r)).collect();
        for &(x, sigma) in &[(0.8f64, 0.5f64), (-1.5, 1.0), (2.0, 2.0)] {
            let xf = Field::from_vec(1, 1, vec![x]).unwrap();
            let d = denoiser_forward(&optimum, &xf, sigma, sd, None).unwrap().data()[0];
            assert!((d - x / (1.0 + sigma * sigma)).abs() < 1e-12);
            let (num, den) = prior.iter().fold((0.0, 0.0), |(n, w), &x0| {
                let wt = (-(x - x0).powi(2) / (2.0 * sigma * sigma)).exp();
                (n + wt * x0, w + wt)
            });
            assert!((num / den - d).abs() < 0.01, "{x} {sigma}: mc {} vs {d}", num / den);
        }
    }
}
