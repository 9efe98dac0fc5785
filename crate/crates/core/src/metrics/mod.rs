//! Regional uptake, hemispheric asymmetry and agreement statistics between
//! synthetic and acquired PET.

mod congruence;
mod delta;
mod icc;
mod profile;
mod report;
mod stats;
mod suvr;

pub use congruence::{cmae, cmae_with_areas, congruence_index, RoiAreas};
pub use delta::{aggregate_delta, delta_suvr_stats, DeltaSuvr};
pub use icc::{icc, one_way_anova, AnovaTerms};
pub use profile::{jitter, line_profile, LineProfile};
pub use report::{icc_units, EvalSubject, Estimate, MetricsReport, SubjectMetrics};
pub use stats::{mean_and_sd, student_t_cdf, student_t_quantile, t_confidence_interval};
pub use suvr::{asymmetry, asymmetry_index, reference_mean, roi_suvr, AsymmetryRecord, RoiSuvr, SuvrTable};
