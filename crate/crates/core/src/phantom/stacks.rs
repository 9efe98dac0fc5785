use crate::error::{Error, Result};
use crate::field::Field;
use crate::sampling::VolumeAssemblyPlan;
use crate::score::{ChannelTag, ConditionStack, Contrast, InputCombo};
use crate::volume::Volume;

/// Condition volumes of one subject, already normalized.
#[derive(Debug, Clone, Copy)]
pub struct ConditionVolumes<'a> {
    pub t1w: &'a Volume,
    pub t2f: Option<&'a Volume>,
    pub low_dose: Option<&'a Volume>,
}

impl<'a> ConditionVolumes<'a> {
    fn get(&self, c: Contrast) -> Option<&'a Volume> {
        match c {
            Contrast::T1w => Some(self.t1w),
            Contrast::T2f => self.t2f,
            Contrast::LowDosePet => self.low_dose,
        }
    }
}

/// One stack per axial slice: for each contrast of `combo` (T1w, T2-FLAIR,
/// low-dose PET order) the window of neighbouring slices around it.
pub fn condition_stacks(
    inputs: &ConditionVolumes<'_>,
    combo: InputCombo,
    plan: &VolumeAssemblyPlan,
) -> Result<Vec<ConditionStack>> {
    plan.validate()?;
    let mut sources = Vec::new();
    for &c in combo.contrasts() {
        let v = inputs
            .get(c)
            .ok_or_else(|| Error::Config(format!("input combination {combo} needs a {c:?} volume")))?;
        inputs.t1w.ensure_same_grid(v, "condition volume")?;
        let slices: Vec<Field> = (0..v.dims()[2]).map(|z| v.axial_slice(z)).collect();
        sources.push((c, slices));
    }
    let nz = inputs.t1w.dims()[2];
    let r = (plan.window / 2) as i32;
    (0..nz)
        .map(|z| {
            let idx = plan.window_indices(z, nz);
            let mut channels = Vec::with_capacity(idx.len() * sources.len());
            let mut layout = Vec::with_capacity(channels.capacity());
            for (c, slices) in &sources {
                for (k, &i) in idx.iter().enumerate() {
                    channels.push(slices[i].clone());
                    layout.push(ChannelTag {
                        contrast: *c,
                        offset: k as i32 - r,
                    });
                }
            }
            ConditionStack::new(channels, layout)
        })
        .collect()
}
