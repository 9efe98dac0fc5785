use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::{CohortSpec, PhantomSpec};
use crate::sampling::{SamplerSettings, VolumeAssemblyPlan};
use crate::score::{InputCombo, Scheme, TrainConfig};

/// Reads a TOML document, or the defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomRunConfig {
    pub phantom: PhantomSpec,
    /// Generate a cohort of `sub-XXX` directories instead of one subject.
    pub cohort: Option<CohortSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThinRunConfig {
    /// A counts volume, a subject directory or a cohort directory.
    pub input: PathBuf,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for ThinRunConfig {
    fn default() -> Self {
        ThinRunConfig {
            input: PathBuf::from("."),
            fraction: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSettings {
    pub patch: usize,
    pub hidden: Vec<usize>,
    pub sigma_data: f64,
}

impl Default for NetSettings {
    fn default() -> Self {
        NetSettings {
            patch: 3,
            hidden: vec![32, 32],
            sigma_data: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    /// Subject or cohort directories.
    pub subjects: Vec<PathBuf>,
    pub scheme: Scheme,
    pub inputs: InputCombo,
    pub net: NetSettings,
    pub plan: VolumeAssemblyPlan,
    pub train: TrainConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            subjects: Vec::new(),
            scheme: Scheme::Kd,
            inputs: InputCombo::T1w,
            net: NetSettings::default(),
            plan: VolumeAssemblyPlan::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleRunConfig {
    pub model: PathBuf,
    pub subjects: Vec<PathBuf>,
    pub inputs: InputCombo,
    /// Defaults to the Karras sampler for sgm-kd models and the
    /// predictor-corrector sampler for sgm-vp models.
    pub sampler: Option<SamplerSettings>,
    pub plan: VolumeAssemblyPlan,
    pub seed: u64,
}

impl Default for SampleRunConfig {
    fn default() -> Self {
        SampleRunConfig {
            model: PathBuf::from("model.bin"),
            subjects: Vec::new(),
            inputs: InputCombo::T1w,
            sampler: None,
            plan: VolumeAssemblyPlan::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalPair {
    pub id: String,
    pub synth: PathBuf,
    pub acquired: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateRunConfig {
    /// Explicit file triples.
    pub pairs: Vec<EvalPair>,
    /// Subject or cohort directories holding `pet_full` and `labels`.
    pub subjects: Vec<PathBuf>,
    /// Directory with one `<subject>/synth_pet` per subject.
    pub synth_root: Option<PathBuf>,
}
