use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Student t cumulative distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    if t2 < df {
        // near zero, I_x(df/2, 1/2) has x close to 1; use the complement
        let central = 0.5 * beta_reg(0.5, df / 2.0, t2 / (df + t2));
        if t >= 0.0 {
            0.5 + central
        } else {
            0.5 - central
        }
    } else {
        let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t2));
        if t >= 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

fn student_t_pdf(t: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + t * t / df).ln()).exp()
}

/// Quantile of the Student t distribution by bracketing, bisection and
/// Newton polishing of the incomplete-beta CDF.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
    }
    if !(df > 0.0 && df.is_finite()) {
        return Err(Error::Domain(format!("degrees of freedom must be positive, got {df}")));
    }
    if p < 0.5 {
        return student_t_quantile(1.0 - p, df).map(|q| -q);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = (student_t_cdf(q, df) - p) / student_t_pdf(q, df);
        if !step.is_finite() {
            break;
        }
        q -= step;
    }
    Ok(q)
}

pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sided interval `mean +- t * s / sqrt(n)` at confidence `level`.
pub fn t_confidence_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Domain(format!("a t interval needs at least 2 values, got {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let (mean, sd) = mean_and_sd(values);
    let t = student_t_quantile(0.5 + level / 2.0, n as f64 - 1.0)?;
    let half = t * sd / (n as f64).sqrt();
    Ok((mean - half, mean + half))
}
