//! Integer ROI label maps with a name/laterality table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{read_pair, write_pair, ByteOrder, DType, Units, Volume, VolumeHeader};

/// The ten grouped evaluation regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RoiName {
    FC,
    TC,
    PC,
    OC,
    IC,
    CWM,
    DGM,
    HipAmy,
    CSF,
    #[serde(rename = "cerebellum")]
    Cerebellum,
}

impl RoiName {
    pub const ALL: [RoiName; 10] = [
        RoiName::FC,
        RoiName::TC,
        RoiName::PC,
        RoiName::OC,
        RoiName::IC,
        RoiName::CWM,
        RoiName::DGM,
        RoiName::HipAmy,
        RoiName::CSF,
        RoiName::Cerebellum,
    ];

    /// Regions with a left and a right variant, in report order.
    pub const LATERALIZED: [RoiName; 8] = [
        RoiName::FC,
        RoiName::TC,
        RoiName::PC,
        RoiName::OC,
        RoiName::IC,
        RoiName::CWM,
        RoiName::DGM,
        RoiName::HipAmy,
    ];

    pub fn is_lateralized(self) -> bool {
        !matches!(self, RoiName::CSF | RoiName::Cerebellum)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoiName::FC => "FC",
            RoiName::TC => "TC",
            RoiName::PC => "PC",
            RoiName::OC => "OC",
            RoiName::IC => "IC",
            RoiName::CWM => "CWM",
            RoiName::DGM => "DGM",
            RoiName::HipAmy => "HipAmy",
            RoiName::CSF => "CSF",
            RoiName::Cerebellum => "cerebellum",
        }
    }
}

impl fmt::Display for RoiName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoiName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RoiName::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown ROI name {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    None,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::None => Side::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiInfo {
    pub name: RoiName,
    pub side: Side,
}

/// Canonical label value for a region/side pair.
///
/// Lateralized regions use odd values for left and even for right; CSF and
/// cerebellum follow the sixteen lateralized labels.
pub fn canonical_label(name: RoiName, side: Side) -> i32 {
    match (name, side) {
        (RoiName::CSF, _) => 17,
        (RoiName::Cerebellum, _) => 18,
        (n, s) => {
            let base = RoiName::LATERALIZED.iter().position(|&r| r == n).unwrap() as i32 * 2 + 1;
            if s == Side::Right {
                base + 1
            } else {
                base
            }
        }
    }
}

pub fn canonical_table() -> BTreeMap<i32, RoiInfo> {
    let mut table = BTreeMap::new();
    for name in RoiName::LATERALIZED {
        for side in [Side::Left, Side::Right] {
            table.insert(canonical_label(name, side), RoiInfo { name, side });
        }
    }
    for name in [RoiName::CSF, RoiName::Cerebellum] {
        table.insert(canonical_label(name, Side::None), RoiInfo { name, side: Side::None });
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoiLabelMap {
    dims: [usize; 3],
    spacing: [f64; 3],
    labels: Vec<i32>,
    table: BTreeMap<i32, RoiInfo>,
}

impl RoiLabelMap {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        labels: Vec<i32>,
        table: BTreeMap<i32, RoiInfo>,
    ) -> Result<Self> {
        if labels.len() != dims.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "{} labels for dims {dims:?}",
                labels.len()
            )));
        }
        if table.contains_key(&0) {
            return Err(Error::Format("label 0 is reserved for background".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != 0 && !table.contains_key(&l)) {
            return Err(Error::Format(format!("label {bad} missing from the ROI table")));
        }
        let map = RoiLabelMap {
            dims,
            spacing,
            labels,
            table,
        };
        map.check_table()?;
        Ok(map)
    }

    fn check_table(&self) -> Result<()> {
        for name in RoiName::LATERALIZED {
            for side in [Side::Left, Side::Right] {
                if self.label_of(name, side).is_none() {
                    return Err(Error::Format(format!("ROI table lacks {side:?} {name}")));
                }
            }
        }
        if self.label_of(RoiName::Cerebellum, Side::None).is_none() {
            return Err(Error::Format("ROI table lacks the cerebellum".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn table(&self) -> &BTreeMap<i32, RoiInfo> {
        &self.table
    }

    pub fn info(&self, label: i32) -> Option<RoiInfo> {
        self.table.get(&label).copied()
    }

    pub fn label_of(&self, name: RoiName, side: Side) -> Option<i32> {
        self.table
            .iter()
            .find(|(_, info)| info.name == name && info.side == side)
            .map(|(&l, _)| l)
    }

    /// `true` for every voxel of `name` on `side` (`Side::None` matches every side).
    pub fn mask(&self, name: RoiName, side: Side) -> Vec<bool> {
        let wanted: Vec<i32> = self
            .table
            .iter()
            .filter(|(_, i)| i.name == name && (side == Side::None || i.side == side))
            .map(|(&l, _)| l)
            .collect();
        self.labels.iter().map(|l| wanted.contains(l)).collect()
    }

    /// Voxel count per region, both sides combined.
    pub fn areas(&self) -> BTreeMap<RoiName, usize> {
        let mut areas = BTreeMap::new();
        for &l in &self.labels {
            if let Some(info) = self.table.get(&l) {
                *areas.entry(info.name).or_insert(0) += 1;
            }
        }
        areas
    }

    pub fn ensure_matches(&self, volume: &Volume) -> Result<()> {
        if volume.dims() != self.dims {
            return Err(Error::Shape(format!(
                "label map dims {:?} vs volume dims {:?}",
                self.dims,
                volume.dims()
            )));
        }
        Ok(())
    }

    pub fn write(&self, stem: impl AsRef<Path>) -> Result<()> {
        let table: BTreeMap<String, RoiInfo> =
            self.table.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let header = VolumeHeader {
            dims: self.dims,
            spacing_mm: self.spacing,
            units: Units::Arbitrary,
            byte_order: ByteOrder::LittleEndian,
            dtype: DType::Int32,
            labels: Some(serde_json::to_value(table)?),
        };
        let bytes: Vec<u8> = self.labels.iter().flat_map(|v| v.to_le_bytes()).collect();
        write_pair(stem.as_ref(), &header, &bytes)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, bytes) = read_pair(path)?;
        if header.dtype != DType::Int32 {
            return Err(Error::Format(format!("{}: label maps are int32", path.display())));
        }
        let raw_table = header
            .labels
            .ok_or_else(|| Error::Format(format!("{}: missing label table", path.display())))?;
        let parsed: BTreeMap<String, RoiInfo> = serde_json::from_value(raw_table)?;
        let mut table = BTreeMap::new();
        for (k, v) in parsed {
            let label: i32 = k
                .parse()
                .map_err(|_| Error::Format(format!("label key {k:?} is not an integer")))?;
            table.insert(label, v);
        }
        let labels = bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        RoiLabelMap::new(header.dims, header.spacing_mm, labels, table)
    }
}
