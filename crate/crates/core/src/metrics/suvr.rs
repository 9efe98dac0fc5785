use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{RoiLabelMap, RoiName, Side};
use crate::volume::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoiSuvr {
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub combined: Option<f64>,
}

/// Region means of one image relative to its cerebellum mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuvrTable {
    pub reference_mean: f64,
    pub rois: BTreeMap<RoiName, RoiSuvr>,
}

/// Per-region asymmetry of one subject, keyed by lateralized region.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AsymmetryRecord {
    pub values: BTreeMap<RoiName, f64>,
}

impl AsymmetryRecord {
    pub fn get(&self, name: RoiName) -> Option<f64> {
        self.values.get(&name).copied()
    }
}

impl FromIterator<(RoiName, f64)> for AsymmetryRecord {
    fn from_iter<I: IntoIterator<Item = (RoiName, f64)>>(iter: I) -> Self {
        AsymmetryRecord {
            values: iter.into_iter().collect(),
        }
    }
}

fn masked_mean(data: &[f32], mask: &[bool]) -> Option<f64> {
    let (s, n) = data
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v as f64, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn reference_mean(pet: &Volume, labels: &RoiLabelMap) -> Result<f64> {
    labels.ensure_matches(pet)?;
    let mask = labels.mask(RoiName::Cerebellum, Side::None);
    let m = masked_mean(pet.data(), &mask)
        .ok_or_else(|| Error::Degenerate("cerebellum reference region is empty".into()))?;
    if !(m > 0.0) {
        return Err(Error::Degenerate(format!("cerebellum reference mean is {m}")));
    }
    Ok(m)
}

pub fn roi_suvr(pet: &Volume, labels: &RoiLabelMap) -> Result<SuvrTable> {
    let reference = reference_mean(pet, labels)?;
    let data = pet.data();
    let mut rois = BTreeMap::new();
    for name in RoiName::ALL {
        let get = |side: Side| masked_mean(data, &labels.mask(name, side)).map(|m| m / reference);
        let entry = if name.is_lateralized() {
            RoiSuvr {
                left: get(Side::Left),
                right: get(Side::Right),
                combined: get(Side::None),
            }
        } else {
            RoiSuvr {
                left: None,
                right: None,
                combined: get(Side::None),
            }
        };
        if entry.combined.is_none() {
            warn!("{name} is empty; it is excluded from the SUVR table");
        }
        rois.insert(name, entry);
    }
    if let Some(c) = rois.get_mut(&RoiName::Cerebellum) {
        c.combined = Some(1.0);
    }
    Ok(SuvrTable {
        reference_mean: reference,
        rois,
    })
}

/// `(left - right) / (left + right)`: negative for left-sided hypometabolism.
pub fn asymmetry(left: f64, right: f64) -> f64 {
    (left - right) / (left + right)
}

pub fn asymmetry_index(table: &SuvrTable) -> AsymmetryRecord {
    let mut out = AsymmetryRecord::default();
    for name in RoiName::LATERALIZED {
        match table.rois.get(&name).map(|r| (r.left, r.right)) {
            Some((Some(l), Some(r))) if l + r > 0.0 => {
                out.values.insert(name, asymmetry(l, r));
            }
            _ => warn!("{name} lacks a usable SUVR on one side; skipped"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::canonical_table;
    use crate::labels::canonical_label;
    use crate::volume::Units;

    /// One voxel per region side, background elsewhere.
    fn tiny(values: &[(i32, f32)]) -> (Volume, RoiLabelMap) {
        let table = canonical_table();
        let labels: Vec<i32> = table.keys().copied().chain([0]).collect();
        let n = labels.len();
        let data = labels
            .iter()
            .map(|l| values.iter().find(|(k, _)| k == l).map_or(1.0, |(_, v)| *v))
            .collect();
        let vol = Volume::new([n, 1, 1], [1.0; 3], Units::Arbitrary, data).unwrap();
        (vol, RoiLabelMap::new([n, 1, 1], [1.0; 3], labels, table).unwrap())
    }

    #[test]
    fn uniform_volume_has_unit_suvr() {
        let (v, l) = tiny(&[]);
        let t = roi_suvr(&v, &l).unwrap();
        for r in t.rois.values() {
            assert_eq!(r.combined, Some(1.0));
        }
        let ai = asymmetry_index(&t);
        assert_eq!(ai.values.len(), 8);
        assert!(ai.values.values().all(|&a| a == 0.0));
    }

    #[test]
    fn direct_ratio_and_sign_convention() {
        let cer = canonical_label(RoiName::Cerebellum, Side::None);
        let fc_l = canonical_label(RoiName::FC, Side::Left);
        let tc_l = canonical_label(RoiName::TC, Side::Left);
        let tc_r = canonical_label(RoiName::TC, Side::Right);
        let (v, l) = tiny(&[(cer, 2.0), (fc_l, 2.4), (tc_l, 1.6), (tc_r, 2.0)]);
        let t = roi_suvr(&v, &l).unwrap();
        assert!((t.rois[&RoiName::FC].left.unwrap() - 1.2).abs() < 1e-7);
        let ai = asymmetry_index(&t);
        assert!((ai.get(RoiName::TC).unwrap() + 0.1111111111111111).abs() < 1e-7);
        assert!((asymmetry(1.2, 1.0) - 0.2 / 2.2).abs() < 1e-15);
        assert_eq!(asymmetry(0.7, 1.3), -asymmetry(1.3, 0.7));
    }

    #[test]
    fn zero_reference_is_an_error() {
        let cer = canonical_label(RoiName::Cerebellum, Side::None);
        let (v, l) = tiny(&[(cer, 0.0)]);
        assert!(matches!(roi_suvr(&v, &l), Err(Error::Degenerate(_))));
    }

    #[test]
    fn empty_region_is_missing_and_skipped() {
        let table = canonical_table();
        let mut labels: Vec<i32> = table.keys().copied().collect();
        let tc_r = canonical_label(RoiName::TC, Side::Right);
        labels.retain(|&l| l != tc_r);
        let n = labels.len();
        let v = Volume::new([n, 1, 1], [1.0; 3], Units::Arbitrary, vec![1.0; n]).unwrap();
        let l = RoiLabelMap::new([n, 1, 1], [1.0; 3], labels, table).unwrap();
        let t = roi_suvr(&v, &l).unwrap();
        assert_eq!(t.rois[&RoiName::TC].right, None);
        assert_eq!(asymmetry_index(&t).get(RoiName::TC), None);
    }
}
