//! Conditional score-based PET synthesis.
//!
//! Two reverse-diffusion samplers (variance-preserving predictor-corrector and
//! the Karras stochastic Heun sampler) drive pluggable conditional denoisers.
//! Around them sit a synthetic paired-phantom pipeline with count-thinning
//! dose reduction and the hemispheric-asymmetry metric suite used to judge
//! synthetic FDG-PET against acquired scans.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod field;
pub mod labels;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod sampling;
pub mod score;
pub mod sde;
pub mod volume;

pub use error::{Error, Result};
pub use field::Field;
pub use labels::{RoiLabelMap, RoiName, Side};
pub use volume::{Units, Volume};
