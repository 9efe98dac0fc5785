use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::labels::{RoiLabelMap, RoiName};

use super::suvr::AsymmetryRecord;

/// Combined left and right voxel count per region.
pub type RoiAreas = BTreeMap<RoiName, usize>;

fn check_sets(synth: &[AsymmetryRecord], acquired: &[AsymmetryRecord]) -> Result<()> {
    if synth.len() != acquired.len() {
        return Err(Error::Shape(format!(
            "{} synthetic vs {} acquired subjects",
            synth.len(),
            acquired.len()
        )));
    }
    if synth.is_empty() {
        return Err(Error::Shape("no subjects".into()));
    }
    for (i, (s, a)) in synth.iter().zip(acquired).enumerate() {
        if !s.values.keys().eq(a.values.keys()) {
            return Err(Error::Shape(format!("subject {i}: synthetic and acquired ROI sets differ")));
        }
    }
    Ok(())
}

/// Fraction of subject x ROI pairs whose asymmetries share a strict sign.
pub fn congruence_index(synth: &[AsymmetryRecord], acquired: &[AsymmetryRecord]) -> Result<f64> {
    check_sets(synth, acquired)?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for (s, a) in synth.iter().zip(acquired) {
        for (name, &x) in &s.values {
            total += 1;
            if x * a.values[name] > 0.0 {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Degenerate("no ROI pairs to compare".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Area-weighted absolute asymmetry error, summed over ROIs and averaged over
/// subjects. `areas` holds one map shared by all subjects or one per subject;
/// weights are relative to the largest area in each map.
pub fn cmae_with_areas(synth: &[AsymmetryRecord], acquired: &[AsymmetryRecord], areas: &[RoiAreas]) -> Result<f64> {
    check_sets(synth, acquired)?;
    if areas.len() != 1 && areas.len() != synth.len() {
        return Err(Error::Shape(format!(
            "{} area maps for {} subjects",
            areas.len(),
            synth.len()
        )));
    }
    let mut sum = 0.0;
    for (i, (s, a)) in synth.iter().zip(acquired).enumerate() {
        let area = &areas[if areas.len() == 1 { 0 } else { i }];
        let max = area.values().copied().max().unwrap_or(0);
        if max == 0 {
            return Err(Error::Degenerate("all ROI areas are zero".into()));
        }
        for (name, &x) in &s.values {
            let w = *area
                .get(name)
                .ok_or_else(|| Error::Shape(format!("no area for {name}")))? as f64
                / max as f64;
            sum += (a.values[name] - x).abs() * w;
        }
    }
    Ok(sum / synth.len() as f64)
}

pub fn cmae(synth: &[AsymmetryRecord], acquired: &[AsymmetryRecord], labels: &RoiLabelMap) -> Result<f64> {
    cmae_with_areas(synth, acquired, &[labels.areas()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(values: &[f64]) -> AsymmetryRecord {
        RoiName::LATERALIZED.iter().copied().zip(values.iter().copied()).collect()
    }

    #[test]
    fn self_and_anti_congruence() {
        let a = rec(&[0.1, -0.2, 0.3, -0.05, 0.02, 0.01, -0.3, 0.2]);
        let flipped: AsymmetryRecord = a.values.iter().map(|(&k, &v)| (k, -v)).collect();
        assert_eq!(congruence_index(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap(), 1.0);
        assert_eq!(congruence_index(&[flipped], &[a]).unwrap(), 0.0);
    }

    #[test]
    fn six_of_eight_matches() {
        let a = rec(&[1.0; 8]);
        let s = rec(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 0.0]);
        assert_eq!(congruence_index(&[s], &[a]).unwrap(), 0.75);
    }

    #[test]
    fn single_roi_cmae() {
        let s: AsymmetryRecord = [(RoiName::TC, 0.10)].into_iter().collect();
        let a: AsymmetryRecord = [(RoiName::TC, 0.06)].into_iter().collect();
        let areas: RoiAreas = [(RoiName::TC, 50), (RoiName::CWM, 100)].into_iter().collect();
        let v = cmae_with_areas(std::slice::from_ref(&s), std::slice::from_ref(&a), std::slice::from_ref(&areas)).unwrap();
        assert!((v - 0.02).abs() < 1e-15);
        let doubled: RoiAreas = areas.iter().map(|(&k, &v)| (k, 2 * v)).collect();
        assert_eq!(cmae_with_areas(std::slice::from_ref(&s), std::slice::from_ref(&a), &[doubled]).unwrap(), v);
        assert_eq!(cmae_with_areas(std::slice::from_ref(&s), std::slice::from_ref(&s), &[areas]).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_sets_are_errors() {
        let a = rec(&[0.1; 8]);
        let b = rec(&[0.1; 7]);
        assert!(congruence_index(std::slice::from_ref(&a), std::slice::from_ref(&b)).is_err());
        assert!(congruence_index(std::slice::from_ref(&a), &[a.clone(), a.clone()]).is_err());
        let areas: RoiAreas = RoiName::ALL.iter().map(|&n| (n, 1)).collect();
        assert!(cmae_with_areas(std::slice::from_ref(&a), &[b], std::slice::from_ref(&areas)).is_err());
        assert!(cmae_with_areas(std::slice::from_ref(&a), std::slice::from_ref(&a), &[areas.clone(), areas.clone(), areas]).is_err());
    }
}
