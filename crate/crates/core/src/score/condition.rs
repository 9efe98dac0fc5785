use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contrast {
    T1w,
    T2f,
    LowDosePet,
}

/// Which contrast a channel carries and its slice offset from the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelTag {
    pub contrast: Contrast,
    pub offset: i32,
}

/// Input combinations: T1w alone, with T2-FLAIR, and either one with the
/// 1 % dose PET.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputCombo {
    #[serde(rename = "t1w")]
    T1w,
    #[serde(rename = "t1w+t2f")]
    T1wT2f,
    #[serde(rename = "t1w+1%")]
    T1wLowDose,
    #[serde(rename = "t1w+t2f+1%")]
    T1wT2fLowDose,
}

impl InputCombo {
    pub const ALL: [InputCombo; 4] = [
        InputCombo::T1w,
        InputCombo::T1wT2f,
        InputCombo::T1wLowDose,
        InputCombo::T1wT2fLowDose,
    ];

    pub fn contrasts(self) -> &'static [Contrast] {
        match self {
            InputCombo::T1w => &[Contrast::T1w],
            InputCombo::T1wT2f => &[Contrast::T1w, Contrast::T2f],
            InputCombo::T1wLowDose => &[Contrast::T1w, Contrast::LowDosePet],
            InputCombo::T1wT2fLowDose => &[Contrast::T1w, Contrast::T2f, Contrast::LowDosePet],
        }
    }

    pub fn uses(self, contrast: Contrast) -> bool {
        self.contrasts().contains(&contrast)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InputCombo::T1w => "t1w",
            InputCombo::T1wT2f => "t1w+t2f",
            InputCombo::T1wLowDose => "t1w+1%",
            InputCombo::T1wT2fLowDose => "t1w+t2f+1%",
        }
    }
}

impl fmt::Display for InputCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputCombo::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown input combination {s:?}")))
    }
}

/// Condition channels fed to the network next to the noisy slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionStack {
    channels: Vec<Field>,
    layout: Vec<ChannelTag>,
}

impl ConditionStack {
    pub fn new(channels: Vec<Field>, layout: Vec<ChannelTag>) -> Result<Self> {
        if !matches!(channels.len(), 3 | 6 | 9) {
            return Err(Error::Shape(format!(
                "condition stacks hold 3, 6 or 9 channels, got {}",
                channels.len()
            )));
        }
        if layout.len() != channels.len() {
            return Err(Error::Shape("layout does not name every channel".into()));
        }
        let shape = channels[0].shape();
        if channels.iter().any(|c| c.shape() != shape) {
            return Err(Error::Shape("condition channels differ in shape".into()));
        }
        Ok(ConditionStack { channels, layout })
    }

    pub fn channels(&self) -> &[Field] {
        &self.channels
    }

    pub fn layout(&self) -> &[ChannelTag] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.channels[0].shape()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(n: usize) -> Vec<ChannelTag> {
        (0..n)
            .map(|i| ChannelTag {
                contrast: Contrast::T1w,
                offset: i as i32 - 1,
            })
            .collect()
    }

    #[test]
    fn channel_count_and_shape_checked() {
        let f = Field::zeros(4, 4);
        assert!(ConditionStack::new(vec![f.clone(); 3], tags(3)).is_ok());
        assert!(ConditionStack::new(vec![f.clone(); 4], tags(4)).is_err());
        let mut mixed = vec![f.clone(); 3];
        mixed[2] = Field::zeros(4, 5);
        assert!(ConditionStack::new(mixed, tags(3)).is_err());
        assert!(ConditionStack::new(vec![f; 3], tags(2)).is_err());
    }

    #[test]
    fn combos_parse_and_count() {
        for c in InputCombo::ALL {
            assert_eq!(c.as_str().parse::<InputCombo>().unwrap(), c);
        }
        assert_eq!(InputCombo::T1wT2fLowDose.contrasts().len() * 3, 9);
        let json = serde_json::to_string(&InputCombo::T1wLowDose).unwrap();
        assert_eq!(json, "\"t1w+1%\"");
    }
}
