//! 3-D scalar volumes and their on-disk format.
//!
//! A volume is stored as a JSON sidecar `<stem>.json` describing the grid and
//! a raw payload `<stem>.raw` of little-endian samples, x fastest, then y,
//! then z.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Arbitrary,
    Counts,
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    units: Units,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], units: Units, data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Shape(format!("volume dims must be positive, got {dims:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::Shape(format!(
                "{} samples for dims {dims:?} ({n} expected)",
                data.len()
            )));
        }
        if units == Units::Counts && data.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(Error::Domain(
                "counts volume must hold nonnegative integers".into(),
            ));
        }
        Ok(Volume {
            dims,
            spacing,
            units,
            data,
        })
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], units: Units) -> Self {
        Volume {
            dims,
            spacing,
            units,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Replaces the units tag without touching the samples.
    pub fn with_units(mut self, units: Units) -> Result<Self> {
        if units == Units::Counts && self.data.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(Error::Domain("samples are not nonnegative integers".into()));
        }
        self.units = units;
        Ok(self)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    pub fn same_grid(&self, other: &Volume) -> bool {
        self.dims == other.dims
    }

    pub fn ensure_same_grid(&self, other: &Volume, what: &str) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::Shape(format!(
                "{what}: dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Axial slice `z` as an `nx` x `ny` field.
    pub fn axial_slice(&self, z: usize) -> Field {
        let plane = self.dims[0] * self.dims[1];
        let start = z * plane;
        let data = self.data[start..start + plane]
            .iter()
            .map(|&v| v as f64)
            .collect();
        Field::from_vec(self.dims[0], self.dims[1], data).expect("plane size")
    }

    pub fn set_axial_slice(&mut self, z: usize, field: &Field) -> Result<()> {
        if field.shape() != (self.dims[0], self.dims[1]) {
            return Err(Error::Shape(format!(
                "slice {:?} does not fit volume plane {:?}",
                field.shape(),
                (self.dims[0], self.dims[1])
            )));
        }
        let plane = self.dims[0] * self.dims[1];
        let start = z * plane;
        for (dst, &src) in self.data[start..start + plane].iter_mut().zip(field.data()) {
            *dst = src as f32;
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        })
    }

    pub fn write(&self, stem: impl AsRef<Path>) -> Result<()> {
        let header = VolumeHeader {
            dims: self.dims,
            spacing_mm: self.spacing,
            units: self.units,
            byte_order: ByteOrder::LittleEndian,
            dtype: DType::Float32,
            labels: None,
        };
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        write_pair(stem.as_ref(), &header, &bytes)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let (header, bytes) = read_pair(path.as_ref())?;
        if header.dtype != DType::Float32 {
            return Err(Error::Format(format!(
                "{}: expected float32 payload, found {:?}",
                path.as_ref().display(),
                header.dtype
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Volume::new(header.dims, header.spacing_mm, header.units, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ByteOrder {
    LittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Float32,
    Int32,
}

impl DType {
    fn size(self) -> usize {
        4
    }
}

/// JSON sidecar shared by volumes and label maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub units: Units,
    pub byte_order: ByteOrder,
    pub dtype: DType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<serde_json::Value>,
}

/// Paths of the sidecar and payload for a stem or a `.json`/`.raw` path.
pub fn file_pair(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut json = stem.clone().into_os_string();
    json.push(".json");
    let mut raw = stem.into_os_string();
    raw.push(".raw");
    (PathBuf::from(json), PathBuf::from(raw))
}

pub(crate) fn write_pair(stem: &Path, header: &VolumeHeader, payload: &[u8]) -> Result<()> {
    let (json, raw) = file_pair(stem);
    if let Some(dir) = json.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(header)?;
    fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    fs::write(&raw, payload).map_err(|e| Error::io(&raw, e))?;
    Ok(())
}

pub(crate) fn read_pair(path: &Path) -> Result<(VolumeHeader, Vec<u8>)> {
    let (json, raw) = file_pair(path);
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let header: VolumeHeader = serde_json::from_str(&text)?;
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let expected = header.dims.iter().product::<usize>() * header.dtype.size();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: payload has {} bytes, header implies {expected}",
            raw.display(),
            bytes.len()
        )));
    }
    Ok((header, bytes))
}
