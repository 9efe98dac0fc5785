use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Units, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// Affine map of [min, max] onto [0, 1].
    UnitRange,
    /// Affine map of [min, max] onto [-1, 1].
    SymmetricRange,
    /// Division by the volume mean.
    MeanDivide,
}

/// Everything needed to undo a normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub mode: NormMode,
    /// Minimum for range modes, 0 for mean division.
    pub offset: f64,
    /// `max - min` for range modes, the mean for mean division.
    pub scale: f64,
    pub units: Units,
}

impl NormRecord {
    pub fn forward(&self, v: f64) -> f64 {
        let u = (v - self.offset) / self.scale;
        match self.mode {
            NormMode::UnitRange | NormMode::MeanDivide => u,
            NormMode::SymmetricRange => 2.0 * u - 1.0,
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        let u = match self.mode {
            NormMode::UnitRange | NormMode::MeanDivide => v,
            NormMode::SymmetricRange => (v + 1.0) / 2.0,
        };
        u * self.scale + self.offset
    }
}

/// Normalizes with statistics of the whole volume.
pub fn normalize(v: &Volume, mode: NormMode) -> Result<(Volume, NormRecord)> {
    let (offset, scale) = match mode {
        NormMode::UnitRange | NormMode::SymmetricRange => {
            let (lo, hi) = v.min_max();
            if !(hi > lo) {
                return Err(Error::Degenerate(format!(
                    "range normalization of a constant volume (value {lo})"
                )));
            }
            (lo, hi - lo)
        }
        NormMode::MeanDivide => {
            let m = v.mean();
            if m == 0.0 || !m.is_finite() {
                return Err(Error::Degenerate(format!("mean division by mean {m}")));
            }
            (0.0, m)
        }
    };
    let record = NormRecord {
        mode,
        offset,
        scale,
        units: v.units(),
    };
    let data = v.data().iter().map(|&x| record.forward(x as f64) as f32).collect();
    let out = Volume::new(v.dims(), v.spacing(), Units::Normalized, data)?;
    Ok((out, record))
}

pub fn denormalize(v: &Volume, record: &NormRecord) -> Result<Volume> {
    let data = v.data().iter().map(|&x| record.inverse(x as f64) as f32).collect();
    let units = if record.units == Units::Counts {
        Units::Arbitrary
    } else {
        record.units
    };
    Volume::new(v.dims(), v.spacing(), units, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vol(values: Vec<f32>) -> Volume {
        Volume::new([values.len(), 1, 1], [1.0; 3], Units::Arbitrary, values).unwrap()
    }

    #[test]
    fn mean_divide_example() {
        let (out, rec) = normalize(&vol(vec![2.0, 4.0, 6.0]), NormMode::MeanDivide).unwrap();
        assert_eq!(out.data(), &[0.5, 1.0, 1.5]);
        assert_eq!(rec.scale, 4.0);
        assert_eq!(out.units(), Units::Normalized);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(normalize(&vol(vec![3.0; 4]), NormMode::UnitRange).is_err());
        assert!(normalize(&vol(vec![3.0; 4]), NormMode::SymmetricRange).is_err());
        assert!(normalize(&vol(vec![-1.0, 1.0]), NormMode::MeanDivide).is_err());
        assert!(normalize(&vol(vec![3.0; 4]), NormMode::MeanDivide).is_ok());
    }

    proptest! {
        #[test]
        fn range_endpoints_are_exact(values in prop::collection::vec(-1e3f32..1e3, 2..40)) {
            let v = vol(values);
            prop_assume!(v.min_max().0 < v.min_max().1);
            let (u, _) = normalize(&v, NormMode::UnitRange).unwrap();
            prop_assert_eq!(u.min_max(), (0.0, 1.0));
            let (s, _) = normalize(&v, NormMode::SymmetricRange).unwrap();
            prop_assert_eq!(s.min_max(), (-1.0, 1.0));
        }

        #[test]
        fn round_trip_recovers_input(values in prop::collection::vec(0.5f32..1e3, 2..40), m in 0usize..3) {
            let v = vol(values);
            prop_assume!(v.min_max().0 < v.min_max().1);
            let mode = [NormMode::UnitRange, NormMode::SymmetricRange, NormMode::MeanDivide][m];
            let (n, rec) = normalize(&v, mode).unwrap();
            let back = denormalize(&n, &rec).unwrap();
            for (a, b) in v.data().iter().zip(back.data()) {
                prop_assert!(((a - b) / a).abs() < 1e-5);
            }
        }

        #[test]
        fn mean_divide_gives_unit_mean(values in prop::collection::vec(0.1f32..1e3, 1..40)) {
            let (n, _) = normalize(&vol(values), NormMode::MeanDivide).unwrap();
            prop_assert!((n.mean() - 1.0).abs() < 1e-5);
        }
    }
}
