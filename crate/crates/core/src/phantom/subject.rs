use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::labels::RoiLabelMap;
use crate::sampling::VolumeAssemblyPlan;
use crate::score::{ConditionStack, Contrast, InputCombo, Scheme, TrainPair};
use crate::volume::{Units, Volume};

use super::generate::Phantom;
use super::normalize::{normalize, NormMode, NormRecord};
use super::stacks::{condition_stacks, ConditionVolumes};

pub const T1W: &str = "t1w";
pub const T2F: &str = "t2f";
pub const PET_FULL: &str = "pet_full";
pub const PET_LOW: &str = "pet_low";
pub const LABELS: &str = "labels";
pub const SYNTH_PET: &str = "synth_pet";

/// One subject directory: `t1w`, `t2f`, `pet_full`, `labels` and optionally
/// `pet_low`, each as a `.json`/`.raw` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub t1w: Volume,
    pub t2f: Volume,
    pub pet_full: Option<Volume>,
    pub pet_low: Option<Volume>,
    pub labels: RoiLabelMap,
}

fn exists(dir: &Path, stem: &str) -> bool {
    dir.join(format!("{stem}.json")).exists()
}

impl From<Phantom> for Subject {
    fn from(p: Phantom) -> Self {
        Subject {
            t1w: p.t1w,
            t2f: p.t2f,
            pet_full: Some(p.pet_full),
            pet_low: None,
            labels: p.labels,
        }
    }
}

impl Subject {
    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let opt = |stem: &str| -> Result<Option<Volume>> {
            if exists(dir, stem) {
                Volume::read(dir.join(stem)).map(Some)
            } else {
                Ok(None)
            }
        };
        let s = Subject {
            t1w: Volume::read(dir.join(T1W))?,
            t2f: Volume::read(dir.join(T2F))?,
            pet_full: opt(PET_FULL)?,
            pet_low: opt(PET_LOW)?,
            labels: RoiLabelMap::read(dir.join(LABELS))?,
        };
        s.check()?;
        Ok(s)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.t1w.write(dir.join(T1W))?;
        self.t2f.write(dir.join(T2F))?;
        if let Some(p) = &self.pet_full {
            p.write(dir.join(PET_FULL))?;
        }
        if let Some(p) = &self.pet_low {
            p.write(dir.join(PET_LOW))?;
        }
        self.labels.write(dir.join(LABELS))
    }

    fn check(&self) -> Result<()> {
        self.t1w.ensure_same_grid(&self.t2f, "t2f")?;
        for v in self.pet_full.iter().chain(&self.pet_low) {
            self.t1w.ensure_same_grid(v, "pet")?;
        }
        self.labels.ensure_matches(&self.t1w)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.t1w.dims()
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.t1w.spacing()
    }

    /// Normalized conditioning inputs for `combo`; see [`prepare_conditions`].
    pub fn conditions(&self, combo: InputCombo, plan: &VolumeAssemblyPlan) -> Result<Vec<ConditionStack>> {
        prepare_conditions(&self.t1w, Some(&self.t2f), self.pet_low.as_ref(), combo, plan)
    }

    /// Full-dose PET slices in the data range of `scheme`.
    pub fn targets(&self, scheme: Scheme) -> Result<(Vec<Field>, NormRecord)> {
        let pet = self
            .pet_full
            .as_ref()
            .ok_or_else(|| Error::Config("subject has no full-dose PET".into()))?;
        let (v, rec) = normalize(pet, target_mode(scheme))?;
        Ok(((0..v.dims()[2]).map(|z| v.axial_slice(z)).collect(), rec))
    }

    pub fn training_pairs(&self, combo: InputCombo, scheme: Scheme, plan: &VolumeAssemblyPlan) -> Result<Vec<TrainPair>> {
        let conds = self.conditions(combo, plan)?;
        let (targets, _) = self.targets(scheme)?;
        Ok(targets
            .into_iter()
            .zip(conds)
            .map(|(target, cond)| TrainPair {
                target,
                cond: Some(cond),
            })
            .collect())
    }
}

/// Normalizes raw condition volumes and stacks them per slice.
///
/// MRI contrasts are mapped to the unit range. The low-dose PET is divided
/// by its mean: its maximum is dominated by count noise.
pub fn prepare_conditions(
    t1w: &Volume,
    t2f: Option<&Volume>,
    low_dose: Option<&Volume>,
    combo: InputCombo,
    plan: &VolumeAssemblyPlan,
) -> Result<Vec<ConditionStack>> {
    let t1w = normalize(t1w, NormMode::UnitRange)?.0;
    let t2f = match (combo.uses(Contrast::T2f), t2f) {
        (false, _) => None,
        (true, Some(v)) => Some(normalize(v, NormMode::UnitRange)?.0),
        (true, None) => {
            return Err(Error::Config(format!("input combination {combo} needs a T2-FLAIR volume")));
        }
    };
    let low = match (combo.uses(Contrast::LowDosePet), low_dose) {
        (false, _) => None,
        (true, Some(v)) => Some(normalize(v, NormMode::MeanDivide)?.0),
        (true, None) => {
            return Err(Error::Config(format!("input combination {combo} needs a low-dose PET volume")));
        }
    };
    let inputs = ConditionVolumes {
        t1w: &t1w,
        t2f: t2f.as_ref(),
        low_dose: low.as_ref(),
    };
    condition_stacks(&inputs, combo, plan)
}

pub fn target_mode(scheme: Scheme) -> NormMode {
    match scheme {
        Scheme::Vp => NormMode::UnitRange,
        Scheme::Kd => NormMode::SymmetricRange,
    }
}

/// Maps a volume in the data range of `scheme` onto [0, 1].
pub fn to_unit_range(v: &Volume, scheme: Scheme) -> Result<Volume> {
    let data = match scheme {
        Scheme::Vp => v.data().to_vec(),
        Scheme::Kd => v.data().iter().map(|&x| (x + 1.0) / 2.0).collect(),
    };
    Volume::new(v.dims(), v.spacing(), Units::Normalized, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_phantom, thin_dose, PhantomSpec};
    use crate::rng;

    fn subject() -> Subject {
        let spec = PhantomSpec {
            dims: [32, 32, 17],
            spacing: [6.0, 6.0, 9.0],
            ..PhantomSpec::default()
        };
        let mut s: Subject = generate_phantom(&spec).unwrap().into();
        s.pet_low = Some(thin_dose(s.pet_full.as_ref().unwrap(), 0.01, &mut rng::seeded(1)).unwrap());
        s
    }

    #[test]
    fn directory_round_trip() {
        let s = subject();
        let dir = tempfile::tempdir().unwrap();
        s.write_dir(dir.path()).unwrap();
        assert_eq!(Subject::read_dir(dir.path()).unwrap(), s);
    }

    #[test]
    fn pairs_cover_every_slice_in_range() {
        let s = subject();
        let plan = VolumeAssemblyPlan::default();
        for scheme in [Scheme::Vp, Scheme::Kd] {
            let pairs = s.training_pairs(InputCombo::T1wLowDose, scheme, &plan).unwrap();
            assert_eq!(pairs.len(), 17);
            let (lo, hi) = scheme.data_range();
            assert!(pairs
                .iter()
                .all(|p| p.target.data().iter().all(|&v| v >= lo && v <= hi)));
            assert_eq!(pairs[0].cond.as_ref().unwrap().len(), 6);
        }
    }

    #[test]
    fn low_dose_required_when_requested() {
        let mut s = subject();
        s.pet_low = None;
        let plan = VolumeAssemblyPlan::default();
        assert!(s.conditions(InputCombo::T1wT2f, &plan).is_ok());
        assert!(matches!(s.conditions(InputCombo::T1wLowDose, &plan), Err(Error::Config(_))));
    }
}
