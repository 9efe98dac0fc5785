use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::volume::file_pair;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Run record written next to every output: enough to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    fn add(map: &mut BTreeMap<String, String>, path: &Path) -> Result<()> {
        map.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn input_file(&mut self, path: &Path) -> Result<()> {
        Self::add(&mut self.inputs, path)
    }

    pub fn output_file(&mut self, path: &Path) -> Result<()> {
        Self::add(&mut self.outputs, path)
    }

    /// Records both halves of a `.json`/`.raw` pair.
    pub fn input_volume(&mut self, stem: &Path) -> Result<()> {
        let (j, r) = file_pair(stem);
        self.input_file(&j)?;
        self.input_file(&r)
    }

    pub fn output_volume(&mut self, stem: &Path) -> Result<()> {
        let (j, r) = file_pair(stem);
        self.output_file(&j)?;
        self.output_file(&r)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.manifest.json", self.command));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
