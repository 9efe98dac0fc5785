use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::labels::RoiLabelMap;
use crate::metrics::{EvalSubject, MetricsReport};
use crate::phantom::{self, generate_phantom, thin_dose, to_unit_range, Subject};
use crate::rng;
use crate::sampling::{assemble_volume, AssemblyJob, KarrasSamplerConfig, PcSamplerConfig, SamplerSettings};
use crate::score::{load_model, ConditionStack, save_model, train_denoiser, write_loss_trace, NetConfig, PatchNet, Scheme};
use crate::volume::{file_pair, Units, Volume};

use super::config::{EvaluateRunConfig, PhantomRunConfig, SampleRunConfig, ThinRunConfig, TrainRunConfig};
use super::manifest::Manifest;

fn is_subject(dir: &Path) -> bool {
    dir.join(format!("{}.json", phantom::T1W)).exists()
}

/// Expands cohort directories into their `sub-*` subject directories.
pub fn subject_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if is_subject(p) {
            out.push(p.clone());
            continue;
        }
        let entries = std::fs::read_dir(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        let mut subs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| is_subject(d))
            .collect();
        if subs.is_empty() {
            return Err(Error::Config(format!("{} holds no subject directories", p.display())));
        }
        subs.sort();
        out.extend(subs);
    }
    if out.is_empty() {
        return Err(Error::Config("no subjects given".into()));
    }
    Ok(out)
}

fn subject_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".into())
}

fn record_subject(m: &mut Manifest, dir: &Path, output: bool) -> Result<()> {
    for stem in [phantom::T1W, phantom::T2F, phantom::PET_FULL, phantom::PET_LOW, phantom::LABELS] {
        let s = dir.join(stem);
        if file_pair(&s).0.exists() {
            if output {
                m.output_volume(&s)?;
            } else {
                m.input_volume(&s)?;
            }
        }
    }
    Ok(())
}

pub fn cmd_phantom(cfg: &PhantomRunConfig, out: &Path) -> Result<Manifest> {
    cfg.phantom.validate()?;
    let mut m = Manifest::new("phantom", cfg.phantom.seed, cfg)?;
    match &cfg.cohort {
        None => {
            let s: Subject = generate_phantom(&cfg.phantom)?.into();
            s.write_dir(out)?;
            record_subject(&mut m, out, true)?;
        }
        Some(cohort) => {
            cohort.validate()?;
            let members = cohort.members(&cfg.phantom);
            let dirs: Vec<PathBuf> = (0..members.len()).map(|i| out.join(format!("sub-{i:03}"))).collect();
            members
                .par_iter()
                .zip(&dirs)
                .map(|(spec, dir)| Subject::from(generate_phantom(spec)?).write_dir(dir))
                .collect::<Result<Vec<_>>>()?;
            for (spec, dir) in members.iter().zip(&dirs) {
                m.seeds.insert(subject_name(dir), spec.seed);
                record_subject(&mut m, dir, true)?;
            }
        }
    }
    m.write(out)?;
    Ok(m)
}

pub fn cmd_thin(cfg: &ThinRunConfig, out: Option<&Path>) -> Result<Manifest> {
    if !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(Error::Config(format!("fraction must lie in (0, 1], got {}", cfg.fraction)));
    }
    let mut m = Manifest::new("thin", cfg.seed, cfg)?;
    let input = &cfg.input;
    let jobs: Vec<(PathBuf, PathBuf)> = if file_pair(input).0.is_file() {
        let dir = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
        vec![(input.clone(), dir)]
    } else {
        subject_dirs(std::slice::from_ref(input))?
            .into_iter()
            .map(|d| {
                let target = match out {
                    Some(o) if is_subject(input) => o.to_path_buf(),
                    Some(o) => o.join(subject_name(&d)),
                    None => d.clone(),
                };
                (d.join(phantom::PET_FULL), target)
            })
            .collect()
    };
    for (i, (src, dir)) in jobs.iter().enumerate() {
        let seed = rng::derive_seed(cfg.seed, i as u64);
        let pet = Volume::read(src)?;
        if pet.units() != Units::Counts {
            return Err(Error::Config(format!("{} is not a counts volume", src.display())));
        }
        let low = thin_dose(&pet, cfg.fraction, &mut rng::seeded(seed))?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = dir.join(phantom::PET_LOW);
        low.write(&stem)?;
        m.input_volume(src)?;
        m.output_volume(&stem)?;
        m.seeds.insert(src.display().to_string(), seed);
        info!("thinned {} -> {}", src.display(), stem.display());
    }
    let mdir = out.map(Path::to_path_buf).unwrap_or_else(|| {
        if jobs.len() == 1 {
            jobs[0].1.clone()
        } else {
            input.clone()
        }
    });
    m.write(&mdir)?;
    Ok(m)
}

pub fn net_config(cfg: &TrainRunConfig) -> NetConfig {
    let mut net = NetConfig::new(cfg.scheme, cfg.inputs.contrasts().len() * cfg.plan.window);
    net.patch = cfg.net.patch;
    net.hidden = cfg.net.hidden.clone();
    net.sigma_data = cfg.net.sigma_data;
    net
}

pub fn cmd_train(cfg: &TrainRunConfig, out: &Path) -> Result<Manifest> {
    cfg.train.validate()?;
    cfg.plan.validate()?;
    let dirs = subject_dirs(&cfg.subjects)?;
    let mut m = Manifest::new("train", cfg.train.seed, cfg)?;
    let mut data = Vec::new();
    for d in &dirs {
        let s = Subject::read_dir(d)?;
        data.extend(s.training_pairs(cfg.inputs, cfg.scheme, &cfg.plan)?);
        record_subject(&mut m, d, false)?;
    }
    let init_seed = rng::derive_seed(cfg.train.seed, 1);
    m.seeds.insert("init".into(), init_seed);
    let mut net = PatchNet::new(net_config(cfg), init_seed)?;
    let report = train_denoiser(&mut net, &data, &cfg.train)?;
    info!(
        "validation loss {:.5} -> {:.5} over {} steps",
        report.initial_validation, report.final_validation, cfg.train.steps
    );
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let model = out.join("model.bin");
    save_model(&net, &model)?;
    let trace = out.join("loss.csv");
    write_loss_trace(&trace, &report.trace)?;
    m.output_file(&model)?;
    m.output_file(&trace)?;
    m.write(out)?;
    Ok(m)
}

/// Sampler used when the configuration names none.
pub fn default_sampler(net: &PatchNet) -> SamplerSettings {
    match net.config().scheme {
        Scheme::Kd => SamplerSettings::Karras(KarrasSamplerConfig {
            schedule: crate::sde::KarrasSchedule {
                sigma_data: net.config().sigma_data,
                ..Default::default()
            },
            ..Default::default()
        }),
        Scheme::Vp => SamplerSettings::Pc(PcSamplerConfig {
            schedule: net.config().vp,
            ..Default::default()
        }),
    }
}

/// Synthesizes a unit-range PET volume for one subject.
pub fn synthesize(net: &PatchNet, subject: &Subject, cfg: &SampleRunConfig, seed: u64) -> Result<Volume> {
    let conds = subject.conditions(cfg.inputs, &cfg.plan)?;
    synthesize_from(net, &conds, subject.dims(), subject.spacing(), cfg, seed)
}

/// Synthesizes from prepared condition stacks, one per axial slice.
pub fn synthesize_from(
    net: &PatchNet,
    conds: &[ConditionStack],
    dims: [usize; 3],
    spacing: [f64; 3],
    cfg: &SampleRunConfig,
    seed: u64,
) -> Result<Volume> {
    let scheme = net.config().scheme;
    let expected = cfg.inputs.contrasts().len() * cfg.plan.window;
    if expected != net.config().cond_channels {
        return Err(Error::Config(format!(
            "model takes {} condition channels but {} gives {expected}",
            net.config().cond_channels,
            cfg.inputs
        )));
    }
    let sampler = match cfg.sampler {
        Some(SamplerSettings::Pc(mut c)) => {
            c.schedule = net.config().vp;
            SamplerSettings::Pc(c)
        }
        Some(s) => s,
        None => default_sampler(net),
    };
    let job = AssemblyJob {
        dims,
        spacing,
        seed,
        clamp: Some(scheme.data_range()),
    };
    to_unit_range(&assemble_volume(net, &sampler, conds, &cfg.plan, &job)?, scheme)
}

pub fn cmd_sample(cfg: &SampleRunConfig, out: &Path) -> Result<Manifest> {
    let net = load_model(&cfg.model)?;
    let dirs = subject_dirs(&cfg.subjects)?;
    let mut m = Manifest::new("sample", cfg.seed, cfg)?;
    m.input_file(&cfg.model)?;
    let single = dirs.len() == 1 && cfg.subjects.len() == 1 && is_subject(&cfg.subjects[0]);
    for (i, d) in dirs.iter().enumerate() {
        let subject = Subject::read_dir(d)?;
        record_subject(&mut m, d, false)?;
        let seed = rng::derive_seed(cfg.seed, i as u64);
        let vol = synthesize(&net, &subject, cfg, seed)?;
        let dir = if single { out.to_path_buf() } else { out.join(subject_name(d)) };
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stem = dir.join(phantom::SYNTH_PET);
        vol.write(&stem)?;
        m.output_volume(&stem)?;
        m.seeds.insert(subject_name(d), seed);
        info!("synthesized {}", stem.display());
    }
    m.write(out)?;
    Ok(m)
}

pub fn cmd_evaluate(cfg: &EvaluateRunConfig, out: &Path) -> Result<(Manifest, MetricsReport)> {
    let mut pairs = cfg.pairs.clone();
    if !cfg.subjects.is_empty() {
        let root = cfg
            .synth_root
            .as_ref()
            .ok_or_else(|| Error::Config("subjects need synth_root".into()))?;
        for d in subject_dirs(&cfg.subjects)? {
            let name = subject_name(&d);
            let nested = root.join(&name).join(phantom::SYNTH_PET);
            let synth = if file_pair(&nested).0.exists() {
                nested
            } else {
                root.join(phantom::SYNTH_PET)
            };
            pairs.push(super::config::EvalPair {
                id: name,
                synth,
                acquired: d.join(phantom::PET_FULL),
                labels: d.join(phantom::LABELS),
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::Config("nothing to evaluate".into()));
    }
    let mut m = Manifest::new("evaluate", 0, cfg)?;
    let mut loaded = Vec::new();
    for p in &pairs {
        let synth = Volume::read(&p.synth)?;
        let acquired = Volume::read(&p.acquired)?;
        let labels = RoiLabelMap::read(&p.labels)?;
        for s in [&p.synth, &p.acquired, &p.labels] {
            m.input_volume(s)?;
        }
        loaded.push((p.id.clone(), synth, acquired, labels));
    }
    let subjects: Vec<EvalSubject<'_>> = loaded
        .iter()
        .map(|(id, synth, acquired, labels)| EvalSubject {
            id,
            synth,
            acquired,
            labels,
        })
        .collect();
    let report = MetricsReport::evaluate(&subjects)?;
    report.write(out)?;
    for f in ["metrics.csv", "metrics.json", "metrics.txt"] {
        m.output_file(&out.join(f))?;
    }
    m.write(out)?;
    Ok((m, report))
}
