//! Synthetic paired phantoms, low-dose simulation and normalization.

mod generate;
mod normalize;
mod smooth;
mod spec;
mod stacks;
mod subject;
mod thin;

pub use generate::{generate_phantom, phantom_layout, region_mean, Phantom, PhantomLayout};
pub use normalize::{denormalize, normalize, NormMode, NormRecord};
pub use smooth::{fwhm_to_sigma, gaussian_kernel, gaussian_smooth};
pub use spec::{default_rois, Asymmetry, CohortSpec, ContrastCoupling, NoiseSpec, PhantomSpec, RoiSpec};
pub use stacks::{condition_stacks, ConditionVolumes};
pub use subject::{prepare_conditions, target_mode, to_unit_range, Subject, LABELS, PET_FULL, PET_LOW, SYNTH_PET, T1W, T2F};
pub use thin::thin_dose;
