use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{RoiLabelMap, RoiName};
use crate::volume::Volume;

use super::congruence::{cmae_with_areas, congruence_index};
use super::delta::{aggregate_delta, delta_suvr_stats, DeltaSuvr};
use super::icc::icc;
use super::stats::t_confidence_interval;
use super::suvr::{asymmetry_index, roi_suvr, AsymmetryRecord, SuvrTable};

/// One subject to evaluate: synthetic and acquired PET on the grid of `labels`.
#[derive(Debug, Clone, Copy)]
pub struct EvalSubject<'a> {
    pub id: &'a str,
    pub synth: &'a Volume,
    pub acquired: &'a Volume,
    pub labels: &'a RoiLabelMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetrics {
    pub id: String,
    pub suvr_synth: SuvrTable,
    pub suvr_acquired: SuvrTable,
    pub ai_synth: AsymmetryRecord,
    pub ai_acquired: AsymmetryRecord,
    pub ci: f64,
    pub cmae: f64,
    pub delta: DeltaSuvr,
    pub icc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// 95 % t interval over per-subject values; absent for one subject.
    pub ci95: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_subjects: usize,
    pub congruence_index: Estimate,
    pub cmae: Estimate,
    pub delta_suvr_mean: Estimate,
    pub delta_suvr_std: Estimate,
    /// Pooled over every subject x ROI unit.
    pub icc: Option<f64>,
    pub subjects: Vec<SubjectMetrics>,
}

/// Paired SUVRs entering the ICC: left and right values of lateralized ROIs
/// and the combined CSF value. The reference region is excluded.
pub fn icc_units(acquired: &SuvrTable, synth: &SuvrTable) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for name in RoiName::ALL {
        if name == RoiName::Cerebellum {
            continue;
        }
        let (a, s) = (&acquired.rois[&name], &synth.rois[&name]);
        let vals: Vec<(Option<f64>, Option<f64>)> = if name.is_lateralized() {
            vec![(a.left, s.left), (a.right, s.right)]
        } else {
            vec![(a.combined, s.combined)]
        };
        out.extend(vals.into_iter().filter_map(|(a, s)| Some((a?, s?))));
    }
    out
}

fn shared_keys(a: &AsymmetryRecord, b: &AsymmetryRecord) -> (AsymmetryRecord, AsymmetryRecord) {
    let keep = |r: &AsymmetryRecord, o: &AsymmetryRecord| -> AsymmetryRecord {
        r.values
            .iter()
            .filter(|(k, _)| o.values.contains_key(k))
            .map(|(&k, &v)| (k, v))
            .collect()
    };
    (keep(a, b), keep(b, a))
}

fn subject_metrics(s: &EvalSubject<'_>) -> Result<SubjectMetrics> {
    s.labels.ensure_matches(s.synth)?;
    s.labels.ensure_matches(s.acquired)?;
    let suvr_synth = roi_suvr(s.synth, s.labels)?;
    let suvr_acquired = roi_suvr(s.acquired, s.labels)?;
    let (ai_synth, ai_acquired) = shared_keys(&asymmetry_index(&suvr_synth), &asymmetry_index(&suvr_acquired));
    let synth = std::slice::from_ref(&ai_synth);
    let acq = std::slice::from_ref(&ai_acquired);
    let ci = congruence_index(synth, acq)?;
    let cmae = cmae_with_areas(synth, acq, &[s.labels.areas()])?;
    let delta = delta_suvr_stats(s.synth, s.acquired, s.labels)?;
    let icc = icc(&icc_units(&suvr_acquired, &suvr_synth)).ok();
    Ok(SubjectMetrics {
        id: s.id.to_string(),
        suvr_synth,
        suvr_acquired,
        ai_synth,
        ai_acquired,
        ci,
        cmae,
        delta,
        icc,
    })
}

fn estimate(value: f64, per_subject: &[f64]) -> Estimate {
    Estimate {
        value,
        ci95: if per_subject.len() >= 2 {
            t_confidence_interval(per_subject, 0.95).ok()
        } else {
            None
        },
    }
}

impl MetricsReport {
    pub fn evaluate(subjects: &[EvalSubject<'_>]) -> Result<MetricsReport> {
        if subjects.is_empty() {
            return Err(Error::Config("no subjects to evaluate".into()));
        }
        let per: Vec<SubjectMetrics> = subjects.par_iter().map(subject_metrics).collect::<Result<_>>()?;
        let synth: Vec<AsymmetryRecord> = per.iter().map(|m| m.ai_synth.clone()).collect();
        let acq: Vec<AsymmetryRecord> = per.iter().map(|m| m.ai_acquired.clone()).collect();
        let areas: Vec<_> = subjects.iter().map(|s| s.labels.areas()).collect();
        let ci = congruence_index(&synth, &acq)?;
        let cmae = cmae_with_areas(&synth, &acq, &areas)?;
        let deltas: Vec<DeltaSuvr> = per.iter().map(|m| m.delta).collect();
        let delta = aggregate_delta(&deltas).expect("nonempty");
        let units: Vec<(f64, f64)> = per
            .iter()
            .flat_map(|m| icc_units(&m.suvr_acquired, &m.suvr_synth))
            .collect();
        let col = |f: fn(&SubjectMetrics) -> f64| -> Vec<f64> { per.iter().map(f).collect() };
        Ok(MetricsReport {
            n_subjects: per.len(),
            congruence_index: estimate(ci, &col(|m| m.ci)),
            cmae: estimate(cmae, &col(|m| m.cmae)),
            delta_suvr_mean: estimate(delta.mean_abs, &col(|m| m.delta.mean_abs)),
            delta_suvr_std: estimate(delta.std, &col(|m| m.delta.std)),
            icc: icc(&units).ok(),
            subjects: per,
        })
    }

    /// One row per subject and metric; CMAE is also given x1e3 and
    /// the SUVR differences x100.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject,metric,value\n");
        for m in &self.subjects {
            let icc = m.icc.map_or(String::new(), |v| v.to_string());
            let rows = [
                ("congruence_index", m.ci.to_string()),
                ("cmae", m.cmae.to_string()),
                ("cmae_x1e3", (m.cmae * 1e3).to_string()),
                ("delta_suvr_mean", m.delta.mean_abs.to_string()),
                ("delta_suvr_mean_x100", (m.delta.mean_abs * 100.0).to_string()),
                ("delta_suvr_std", m.delta.std.to_string()),
                ("delta_suvr_std_x100", (m.delta.std * 100.0).to_string()),
                ("suvr_icc", icc),
            ];
            for (k, v) in rows {
                let _ = writeln!(out, "{},{k},{v}", m.id);
            }
            for (name, ai) in &m.ai_acquired.values {
                let _ = writeln!(out, "{},ai_acquired_{name},{ai}", m.id);
            }
            for (name, ai) in &m.ai_synth.values {
                let _ = writeln!(out, "{},ai_synth_{name},{ai}", m.id);
            }
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let scaled = |e: &Estimate, s: f64| {
            serde_json::json!({
                "value": e.value * s,
                "ci95": e.ci95.map(|(a, b)| [a * s, b * s]),
            })
        };
        serde_json::json!({
            "n_subjects": self.n_subjects,
            "suvr_icc": self.icc,
            "cmae_x1e3": scaled(&self.cmae, 1e3),
            "congruence_index": scaled(&self.congruence_index, 1.0),
            "delta_suvr_mean_x100": scaled(&self.delta_suvr_mean, 100.0),
            "delta_suvr_std_x100": scaled(&self.delta_suvr_std, 100.0),
            "subjects": self.subjects,
        })
    }

    pub fn to_table(&self) -> String {
        let fmt = |e: &Estimate, s: f64| match e.ci95 {
            Some((a, b)) => format!("{:.4} [{:.4}, {:.4}]", e.value * s, a * s, b * s),
            None => format!("{:.4}", e.value * s),
        };
        let mut out = String::new();
        let _ = writeln!(out, "subjects            {}", self.n_subjects);
        let _ = writeln!(
            out,
            "SUVR ICC            {}",
            self.icc.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
        let _ = writeln!(out, "CMAE (x1e3)         {}", fmt(&self.cmae, 1e3));
        let _ = writeln!(out, "Congruence Index    {}", fmt(&self.congruence_index, 1.0));
        let _ = writeln!(out, "dSUVR mean (x100)   {}", fmt(&self.delta_suvr_mean, 100.0));
        let _ = writeln!(out, "dSUVR std (x100)    {}", fmt(&self.delta_suvr_std, 100.0));
        out
    }

    /// Writes `metrics.csv`, `metrics.json` and `metrics.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        put("metrics.csv", self.to_csv())?;
        put("metrics.json", serde_json::to_string_pretty(&self.summary_json())?)?;
        put("metrics.txt", self.to_table())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_phantom, PhantomSpec};

    #[test]
    fn self_comparison() {
        let spec = PhantomSpec {
            dims: [32, 32, 17],
            spacing: [6.0, 6.0, 9.0],
            ..PhantomSpec::default()
        };
        let p = generate_phantom(&spec).unwrap();
        let s = EvalSubject {
            id: "sub-000",
            synth: &p.pet_full,
            acquired: &p.pet_full,
            labels: &p.labels,
        };
        let r = MetricsReport::evaluate(&[s, EvalSubject { id: "sub-001", ..s }]).unwrap();
        assert_eq!(r.congruence_index.value, 1.0);
        assert_eq!(r.cmae.value, 0.0);
        assert_eq!(r.delta_suvr_mean.value, 0.0);
        assert_eq!(r.delta_suvr_std.value, 0.0);
        assert_eq!(r.icc, Some(1.0));
        assert_eq!(r.congruence_index.ci95, Some((1.0, 1.0)));
        let csv = r.to_csv();
        assert!(csv.contains("sub-001,cmae_x1e3,0"));
        assert!(csv.contains("delta_suvr_mean_x100"));
        let j = r.summary_json();
        assert!(j["cmae_x1e3"]["ci95"].is_array());
        assert!(r.to_table().contains("Congruence Index"));
    }
}
