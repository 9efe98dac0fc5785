use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineProfile {
    pub values: Vec<f64>,
    /// Root mean square of the first differences.
    pub jitter: f64,
}

pub fn jitter(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Intensities along z at coronal index `y` and column `x`.
pub fn line_profile(volume: &Volume, y: usize, x: usize) -> Result<LineProfile> {
    let [nx, ny, nz] = volume.dims();
    if x >= nx || y >= ny {
        return Err(Error::Domain(format!(
            "profile position (x {x}, y {y}) outside a {nx} x {ny} plane"
        )));
    }
    let values: Vec<f64> = (0..nz).map(|z| volume.get(x, y, z) as f64).collect();
    Ok(LineProfile {
        jitter: jitter(&values),
        values,
    })
}
