//! Slice-wise synthesis of a full volume from a 2-D conditional model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng;
use crate::score::{ConditionStack, Denoiser};
use crate::volume::{Units, Volume};

use super::{karras_sample, pc_sample, KarrasSamplerConfig, PcSamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgePolicy {
    /// Out-of-volume neighbours repeat the boundary slice.
    #[default]
    Replicate,
}

/// Slices along the axial (z) axis; each target slice is conditioned on a
/// window of neighbouring slices per contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeAssemblyPlan {
    pub window: usize,
    pub edge: EdgePolicy,
}

impl Default for VolumeAssemblyPlan {
    fn default() -> Self {
        VolumeAssemblyPlan {
            window: 3,
            edge: EdgePolicy::Replicate,
        }
    }
}

impl VolumeAssemblyPlan {
    pub fn validate(&self) -> Result<()> {
        if self.window.is_multiple_of(2) {
            return Err(Error::Config(format!("window must be odd, got {}", self.window)));
        }
        Ok(())
    }

    /// Slice indices making up the window around `z` in a volume of `nz` slices.
    pub fn window_indices(&self, z: usize, nz: usize) -> Vec<usize> {
        let r = (self.window / 2) as isize;
        (-r..=r)
            .map(|o| match self.edge {
                EdgePolicy::Replicate => (z as isize + o).clamp(0, nz as isize - 1) as usize,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerSettings {
    Pc(PcSamplerConfig),
    Karras(KarrasSamplerConfig),
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerSettings::Pc(c) => c.validate(),
            SamplerSettings::Karras(c) => c.validate(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            SamplerSettings::Pc(c) => c.seed = seed,
            SamplerSettings::Karras(c) => c.seed = seed,
        }
        self
    }
}

/// Target grid, global seed, and the final clamp range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyJob {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub seed: u64,
    pub clamp: Option<(f64, f64)>,
}

pub fn sample_slice<D: Denoiser + ?Sized>(
    denoiser: &D,
    sampler: &SamplerSettings,
    cond: Option<&ConditionStack>,
    shape: (usize, usize),
    seed: u64,
) -> Result<Field> {
    match sampler.with_seed(seed) {
        SamplerSettings::Pc(c) => pc_sample(denoiser, cond, shape, &c),
        SamplerSettings::Karras(c) => karras_sample(denoiser, cond, shape, &c),
    }
}

fn check_job(sampler: &SamplerSettings, conditions: &[ConditionStack], plan: &VolumeAssemblyPlan, job: &AssemblyJob) -> Result<()> {
    plan.validate()?;
    sampler.validate()?;
    let [nx, ny, nz] = job.dims;
    if conditions.len() != nz {
        return Err(Error::Shape(format!(
            "{} condition stacks for {nz} slices",
            conditions.len()
        )));
    }
    for (z, c) in conditions.iter().enumerate() {
        if c.shape() != (nx, ny) {
            return Err(Error::Shape(format!(
                "slice {z} conditions {:?} vs target plane {:?}",
                c.shape(),
                (nx, ny)
            )));
        }
        if c.len() % plan.window != 0 {
            return Err(Error::Shape(format!(
                "slice {z}: {} channels is not a whole number of {}-slice windows",
                c.len(),
                plan.window
            )));
        }
    }
    Ok(())
}

fn finish(slices: Vec<(usize, Field)>, job: &AssemblyJob) -> Result<Volume> {
    let mut vol = Volume::zeros(job.dims, job.spacing, Units::Normalized);
    for (z, mut s) in slices {
        if let Some((lo, hi)) = job.clamp {
            s.clamp(lo, hi);
        }
        vol.set_axial_slice(z, &s)?;
    }
    Ok(vol)
}

/// Samples every slice independently (in parallel) with seed
/// `derive_seed(job.seed, z)`.
pub fn assemble_volume<D: Denoiser + ?Sized>(
    denoiser: &D,
    sampler: &SamplerSettings,
    conditions: &[ConditionStack],
    plan: &VolumeAssemblyPlan,
    job: &AssemblyJob,
) -> Result<Volume> {
    let order: Vec<usize> = (0..job.dims[2]).collect();
    check_job(sampler, conditions, plan, job)?;
    let shape = (job.dims[0], job.dims[1]);
    let slices = order
        .par_iter()
        .map(|&z| {
            sample_slice(denoiser, sampler, Some(&conditions[z]), shape, rng::derive_seed(job.seed, z as u64))
                .map(|s| (z, s))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(slices, job)
}

/// Sequential assembly visiting slices in `order`.
pub fn assemble_volume_in_order<D: Denoiser + ?Sized>(
    denoiser: &D,
    sampler: &SamplerSettings,
    conditions: &[ConditionStack],
    plan: &VolumeAssemblyPlan,
    job: &AssemblyJob,
    order: &[usize],
) -> Result<Volume> {
    check_job(sampler, conditions, plan, job)?;
    let mut seen = vec![false; job.dims[2]];
    for &z in order {
        if z >= seen.len() || std::mem::replace(&mut seen[z], true) {
            return Err(Error::Domain("order must be a permutation of the slice indices".into()));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Domain("order must visit every slice".into()));
    }
    let shape = (job.dims[0], job.dims[1]);
    let mut slices = Vec::with_capacity(order.len());
    for &z in order {
        let s = sample_slice(denoiser, sampler, Some(&conditions[z]), shape, rng::derive_seed(job.seed, z as u64))?;
        slices.push((z, s));
    }
    finish(slices, job)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_replicates_edges() {
        let plan = VolumeAssemblyPlan::default();
        assert_eq!(plan.window_indices(0, 5), vec![0, 0, 1]);
        assert_eq!(plan.window_indices(2, 5), vec![1, 2, 3]);
        assert_eq!(plan.window_indices(4, 5), vec![3, 4, 4]);
        assert_eq!(plan.window_indices(0, 1), vec![0, 0, 0]);
        assert!(VolumeAssemblyPlan { window: 4, ..plan }.validate().is_err());
    }

    #[test]
    fn sampler_settings_parse_from_toml() {
        let s: SamplerSettings = toml::from_str("kind = \"karras\"\ns_churn = 0.0\n[schedule]\nn_steps = 12\n").unwrap();
        match s {
            SamplerSettings::Karras(k) => {
                assert_eq!(k.schedule.n_steps, 12);
                assert_eq!(k.s_churn, 0.0);
                assert_eq!(k.schedule.sigma_max, 80.0);
            }
            _ => panic!(),
        }
    }
}
