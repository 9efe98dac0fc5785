use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{RoiName, Side};

/// Ellipsoidal region in normalized coordinates: every axis of the grid maps
/// to [-1, 1] and the left hemisphere is x < 0. Lateralized regions are given
/// by their left copy; the right copy is its mirror image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiSpec {
    pub name: RoiName,
    pub center: [f64; 3],
    pub axes: [f64; 3],
    /// Regions are painted in ascending priority; later ones win overlaps.
    pub priority: u32,
    /// Full-dose PET uptake in counts.
    pub uptake: f64,
    pub t1w: f64,
    pub t2f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Asymmetry {
    pub roi: RoiName,
    pub side: Side,
    /// Hypometabolism fraction: the affected side takes `(1 - fraction)` of
    /// the contralateral uptake.
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation of the multiplicative PET noise.
    pub pet_relative: f64,
    /// Full width at half maximum of the Gaussian filter applied to the PET noise.
    pub pet_fwhm_mm: f64,
    /// Additive white noise on the MRI contrasts.
    pub mri_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            pet_relative: 0.05,
            pet_fwhm_mm: 4.0,
            mri_sigma: 0.02,
        }
    }
}

/// How hypometabolism shows on the MRI contrasts: a region with fraction `f`
/// has T1w intensity scaled by `1 - t1w * f` and T2-FLAIR by `1 + t2f * f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastCoupling {
    pub t1w: f64,
    pub t2f: f64,
}

impl Default for ContrastCoupling {
    fn default() -> Self {
        ContrastCoupling { t1w: 0.5, t2f: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub seed: u64,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub rois: Vec<RoiSpec>,
    pub asymmetry: Vec<Asymmetry>,
    pub noise: NoiseSpec,
    pub coupling: ContrastCoupling,
    /// Amplitude of the per-subject geometry jitter in normalized units.
    pub jitter: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            seed: 0,
            dims: [64, 64, 33],
            spacing: [3.0, 3.0, 4.5],
            rois: default_rois(),
            asymmetry: vec![Asymmetry {
                roi: RoiName::TC,
                side: Side::Left,
                fraction: 0.2,
            }],
            noise: NoiseSpec::default(),
            coupling: ContrastCoupling::default(),
            jitter: 0.03,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn roi(name: RoiName, center: [f64; 3], axes: [f64; 3], priority: u32, uptake: f64, t1w: f64, t2f: f64) -> RoiSpec {
    RoiSpec {
        name,
        center,
        axes,
        priority,
        uptake,
        t1w,
        t2f,
    }
}

/// A coarse brain: white matter core, four cortical lobes, insula, deep grey
/// matter, hippocampus/amygdala, ventricles and cerebellum.
pub fn default_rois() -> Vec<RoiSpec> {
    use RoiName::*;
    vec![
        roi(CWM, [-0.33, 0.0, 0.05], [0.36, 0.70, 0.55], 1, 400.0, 1.0, 0.45),
        roi(Cerebellum, [0.0, -0.55, -0.65], [0.50, 0.25, 0.22], 2, 1000.0, 0.68, 0.55),
        roi(FC, [-0.35, 0.55, 0.15], [0.30, 0.28, 0.35], 3, 1200.0, 0.6, 0.6),
        roi(PC, [-0.35, -0.25, 0.45], [0.30, 0.30, 0.25], 4, 1200.0, 0.6, 0.6),
        roi(OC, [-0.25, -0.70, 0.05], [0.22, 0.18, 0.28], 5, 1200.0, 0.6, 0.6),
        roi(TC, [-0.62, 0.05, -0.25], [0.16, 0.45, 0.22], 6, 1200.0, 0.6, 0.6),
        roi(IC, [-0.42, 0.10, 0.0], [0.06, 0.18, 0.15], 7, 1200.0, 0.6, 0.6),
        roi(DGM, [-0.16, 0.10, 0.0], [0.10, 0.18, 0.15], 8, 1150.0, 0.75, 0.5),
        roi(HipAmy, [-0.30, -0.05, -0.35], [0.08, 0.20, 0.10], 9, 800.0, 0.45, 0.7),
        roi(CSF, [0.0, 0.0, 0.1], [0.08, 0.30, 0.15], 10, 100.0, 0.15, 0.05),
    ]
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::Config(format!("dims must be positive, got {:?}", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("spacing must be positive, got {:?}", self.spacing)));
        }
        for name in RoiName::ALL {
            let n = self.rois.iter().filter(|r| r.name == name).count();
            if n != 1 {
                return Err(Error::Config(format!("{n} geometry entries for {name}, expected 1")));
            }
        }
        for r in &self.rois {
            if r.axes.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::Config(format!("{} axes must be positive", r.name)));
            }
            if !(r.uptake >= 0.0 && r.uptake.is_finite()) {
                return Err(Error::Config(format!("{} uptake must be nonnegative", r.name)));
            }
            if r.name.is_lateralized() && r.center[0] >= 0.0 {
                return Err(Error::Config(format!(
                    "{} is lateralized; give its left copy (center x < 0)",
                    r.name
                )));
            }
        }
        for a in &self.asymmetry {
            if !(0.0..1.0).contains(&a.fraction) {
                return Err(Error::Config(format!(
                    "hypometabolism fraction must lie in [0, 1), got {}",
                    a.fraction
                )));
            }
            if !a.roi.is_lateralized() || a.side == Side::None {
                return Err(Error::Config(format!(
                    "asymmetry needs a lateralized ROI and a side, got {} {:?}",
                    a.roi, a.side
                )));
            }
        }
        let n = self.noise;
        if !(n.pet_relative >= 0.0 && n.pet_fwhm_mm >= 0.0 && n.mri_sigma >= 0.0) {
            return Err(Error::Config("noise levels must be nonnegative".into()));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::Config(format!("jitter must lie in [0, 0.5), got {}", self.jitter)));
        }
        Ok(())
    }

    /// Product of `(1 - fraction)` over asymmetry entries for one region side.
    pub fn retained(&self, name: RoiName, side: Side) -> f64 {
        self.asymmetry
            .iter()
            .filter(|a| a.roi == name && a.side == side)
            .map(|a| 1.0 - a.fraction)
            .product()
    }
}

/// Random cohort built from a template: every subject draws its own seed and,
/// for each lateralized region, an affected side and a fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub fraction_range: (f64, f64),
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_subjects: 12,
            fraction_range: (0.04, 0.15),
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.fraction_range;
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "fraction range must satisfy 0 <= lo <= hi < 1, got {:?}",
                self.fraction_range
            )));
        }
        Ok(())
    }

    pub fn member(&self, template: &PhantomSpec, index: usize) -> PhantomSpec {
        use rand::Rng;

        let seed = crate::rng::derive_seed(template.seed, index as u64);
        let mut rng = crate::rng::seeded(seed);
        let (lo, hi) = self.fraction_range;
        let asymmetry = RoiName::LATERALIZED
            .iter()
            .map(|&roi| {
                let side = if rng.random::<bool>() { Side::Left } else { Side::Right };
                let fraction = if hi > lo { rng.random_range(lo..hi) } else { lo };
                Asymmetry { roi, side, fraction }
            })
            .collect();
        PhantomSpec {
            seed,
            asymmetry,
            ..template.clone()
        }
    }

    pub fn members(&self, template: &PhantomSpec) -> Vec<PhantomSpec> {
        (0..self.n_subjects).map(|i| self.member(template, i)).collect()
    }
}
