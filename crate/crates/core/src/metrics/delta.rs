use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::RoiLabelMap;
use crate::volume::Volume;

use super::suvr::reference_mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSuvr {
    /// Mean absolute voxel-wise SUVR difference over the brain mask.
    pub mean_abs: f64,
    /// Population standard deviation of the signed difference.
    pub std: f64,
}

/// Voxel-wise SUVR difference (synthetic minus acquired) over all labelled
/// voxels, each image scaled by its own cerebellum mean.
pub fn delta_suvr_stats(synth: &Volume, acquired: &Volume, labels: &RoiLabelMap) -> Result<DeltaSuvr> {
    synth.ensure_same_grid(acquired, "synthetic vs acquired")?;
    let rs = reference_mean(synth, labels)?;
    let ra = reference_mean(acquired, labels)?;
    let diffs: Vec<f64> = synth
        .data()
        .iter()
        .zip(acquired.data())
        .zip(labels.labels())
        .filter(|(_, &l)| l != 0)
        .map(|((&s, &a), _)| s as f64 / rs - a as f64 / ra)
        .collect();
    if diffs.is_empty() {
        return Err(Error::Degenerate("brain mask is empty".into()));
    }
    let n = diffs.len() as f64;
    let mean_abs = diffs.iter().map(|d| d.abs()).sum::<f64>() / n;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok(DeltaSuvr {
        mean_abs,
        std: var.sqrt(),
    })
}

/// Subject average of both statistics.
pub fn aggregate_delta(per_subject: &[DeltaSuvr]) -> Option<DeltaSuvr> {
    if per_subject.is_empty() {
        return None;
    }
    let n = per_subject.len() as f64;
    Some(DeltaSuvr {
        mean_abs: per_subject.iter().map(|d| d.mean_abs).sum::<f64>() / n,
        std: per_subject.iter().map(|d| d.std).sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{canonical_label, canonical_table, RoiName, Side};
    use crate::volume::Units;

    fn map(labels: Vec<i32>) -> RoiLabelMap {
        RoiLabelMap::new([labels.len(), 1, 1], [1.0; 3], labels, canonical_table()).unwrap()
    }

    fn vol(d: Vec<f32>) -> Volume {
        Volume::new([d.len(), 1, 1], [1.0; 3], Units::Arbitrary, d).unwrap()
    }

    const CER: i32 = 18;

    #[test]
    fn identity_is_zero() {
        let l = map(vec![CER, 1, 2, 0, 17]);
        let a = vol(vec![2.0, 3.0, 1.0, 7.0, 0.5]);
        assert_eq!(delta_suvr_stats(&a, &a, &l).unwrap(), DeltaSuvr { mean_abs: 0.0, std: 0.0 });
    }

    #[test]
    fn offset_outside_the_reference() {
        assert_eq!(canonical_label(RoiName::Cerebellum, Side::None), CER);
        let l = map(vec![CER, 1, 1, 2, 2, 0]);
        let a = vol(vec![2.0, 2.0, 3.0, 4.0, 1.0, 9.0]);
        let c = 0.25;
        let s = vol(vec![2.0, 2.5, 3.5, 4.5, 1.5, 0.0]);
        let d = delta_suvr_stats(&s, &a, &l).unwrap();
        // deltas {0, c, c, c, c}
        assert!((d.mean_abs - 0.8 * c).abs() < 1e-12);
        assert!((d.std - 0.4 * c).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_three_voxel_mask() {
        let l = map(vec![CER, CER, 1, 0]);
        let a = vol(vec![1.0, 1.0, 1.0, 5.0]);
        let s = vol(vec![1.1, 0.9, 1.1, 0.0]);
        let d = delta_suvr_stats(&s, &a, &l).unwrap();
        assert!((d.mean_abs - 0.1).abs() < 1e-7);
        assert!((d.std - 0.09428090415820634).abs() < 1e-7);
    }

    #[test]
    fn mismatched_dims() {
        let l = map(vec![CER, 1]);
        let a = vol(vec![1.0, 1.0]);
        let b = Volume::new([1, 2, 1], [1.0; 3], Units::Arbitrary, vec![1.0, 1.0]).unwrap();
        assert!(delta_suvr_stats(&a, &b, &l).is_err());
    }
}
