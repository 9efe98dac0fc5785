//! Reverse-process samplers and slice-wise volume assembly.

mod assemble;
mod karras;
mod pc;

pub use assemble::{
    assemble_volume, assemble_volume_in_order, sample_slice, AssemblyJob, EdgePolicy, SamplerSettings,
    VolumeAssemblyPlan,
};
pub use karras::{karras_churn, karras_sample, karras_sample_from, KarrasSamplerConfig};
pub use pc::{corrector_step, corrector_step_size, pc_sample, pc_sample_from, PcSamplerConfig};

/// Reported after every sampler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub step: usize,
    pub total: usize,
    /// VP time or Karras noise level reached by this step.
    pub level: f64,
}

pub type ProgressFn<'a> = &'a (dyn Fn(Progress) + Sync);
