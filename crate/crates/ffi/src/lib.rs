//! C ABI over `pet_sgm`.
//!
//! Every entry point returns a [`PsStatus`]; on failure the message is kept
//! per thread and read with [`ps_last_error`]. Objects cross the boundary as
//! opaque handles that the caller releases with the matching `_free`
//! function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use pet_sgm::cli::{synthesize_from, SampleRunConfig};
use pet_sgm::metrics::{self, AsymmetryRecord, EvalSubject};
use pet_sgm::phantom::{self, NormMode};
use pet_sgm::sampling::{KarrasSamplerConfig, PcSamplerConfig, SamplerSettings};
use pet_sgm::score::{self, InputCombo, PatchNet, Scheme};
use pet_sgm::{labels::RoiName, rng, Error, RoiLabelMap, Units, Volume};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Domain = 5,
    Diverged = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsUnits {
    Arbitrary = 0,
    Counts = 1,
    Normalized = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsNormMode {
    UnitRange = 0,
    SymmetricRange = 1,
    MeanDivide = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsInputCombo {
    T1w = 0,
    T1wT2f = 1,
    T1wLowDose = 2,
    T1wT2fLowDose = 3,
}

/// Agreement of one synthetic volume with its acquired counterpart.
/// `icc` is NaN when it is undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsSubjectMetrics {
    pub congruence_index: f64,
    pub cmae: f64,
    pub delta_suvr_mean: f64,
    pub delta_suvr_std: f64,
    pub icc: f64,
}

pub struct PsVolume(Volume);
pub struct PsLabelMap(RoiLabelMap);
pub struct PsModel(PatchNet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::Io { .. } => PsStatus::Io,
        Error::Format(_) | Error::Json(_) => PsStatus::Format,
        Error::Config(_) | Error::Shape(_) => PsStatus::InvalidArgument,
        Error::Domain(_) | Error::Degenerate(_) => PsStatus::Domain,
        Error::Diverged { .. } | Error::TrainingDiverged { .. } => PsStatus::Diverged,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type FfiResult<T = ()> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            PsStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            PsStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &'static str) -> FfiResult<&'a [T]> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn units(u: PsUnits) -> Units {
    match u {
        PsUnits::Arbitrary => Units::Arbitrary,
        PsUnits::Counts => Units::Counts,
        PsUnits::Normalized => Units::Normalized,
    }
}

/// Copies `nx * ny * nz` samples (x fastest) into a new volume.
#[no_mangle]
pub unsafe extern "C" fn ps_volume_new(
    dims: *const usize,
    spacing: *const f64,
    unit: PsUnits,
    data: *const f32,
    out_volume: *mut *mut PsVolume,
) -> PsStatus {
    guard(|| {
        let d = slice_arg(dims, 3, "dims")?;
        let s = slice_arg(spacing, 3, "spacing")?;
        let dims = [d[0], d[1], d[2]];
        let n = dims.iter().product::<usize>();
        let samples = slice_arg(data, n, "data")?.to_vec();
        let v = Volume::new(dims, [s[0], s[1], s[2]], units(unit), samples)?;
        *out(out_volume, "out_volume")? = boxed(PsVolume(v));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_volume_read(path: *const c_char, out_volume: *mut *mut PsVolume) -> PsStatus {
    guard(|| {
        let v = Volume::read(path_arg(path, "path")?)?;
        *out(out_volume, "out_volume")? = boxed(PsVolume(v));
        Ok(())
    })
}

/// Writes `<stem>.json` and `<stem>.raw`.
#[no_mangle]
pub unsafe extern "C" fn ps_volume_write(volume: *const PsVolume, stem: *const c_char) -> PsStatus {
    guard(|| {
        deref(volume, "volume")?.0.write(path_arg(stem, "stem")?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_volume_free(volume: *mut PsVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ps_volume_dims(volume: *const PsVolume, out_dims: *mut usize) -> PsStatus {
    guard(|| {
        let d = deref(volume, "volume")?.0.dims();
        if out_dims.is_null() {
            return Err(Fail::Null("out_dims"));
        }
        ptr::copy_nonoverlapping(d.as_ptr(), out_dims, 3);
        Ok(())
    })
}

/// Borrowed view of the samples, valid while the volume lives.
#[no_mangle]
pub unsafe extern "C" fn ps_volume_data(
    volume: *const PsVolume,
    out_data: *mut *const f32,
    out_len: *mut usize,
) -> PsStatus {
    guard(|| {
        let v = &deref(volume, "volume")?.0;
        *out(out_data, "out_data")? = v.data().as_ptr();
        *out(out_len, "out_len")? = v.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_labels_read(path: *const c_char, out_labels: *mut *mut PsLabelMap) -> PsStatus {
    guard(|| {
        let l = RoiLabelMap::read(path_arg(path, "path")?)?;
        *out(out_labels, "out_labels")? = boxed(PsLabelMap(l));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_labels_free(labels: *mut PsLabelMap) {
    if !labels.is_null() {
        drop(Box::from_raw(labels));
    }
}

/// Default phantom with the given seed and left temporal hypometabolism
/// `left_tc_fraction`. Any output pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn ps_phantom_generate(
    seed: u64,
    left_tc_fraction: f64,
    out_t1w: *mut *mut PsVolume,
    out_t2f: *mut *mut PsVolume,
    out_pet: *mut *mut PsVolume,
    out_labels: *mut *mut PsLabelMap,
) -> PsStatus {
    guard(|| {
        let mut spec = phantom::PhantomSpec {
            seed,
            ..Default::default()
        };
        spec.asymmetry[0].fraction = left_tc_fraction;
        let p = phantom::generate_phantom(&spec)?;
        if let Some(o) = out_t1w.as_mut() {
            *o = boxed(PsVolume(p.t1w));
        }
        if let Some(o) = out_t2f.as_mut() {
            *o = boxed(PsVolume(p.t2f));
        }
        if let Some(o) = out_pet.as_mut() {
            *o = boxed(PsVolume(p.pet_full));
        }
        if let Some(o) = out_labels.as_mut() {
            *o = boxed(PsLabelMap(p.labels));
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_thin_dose(
    pet: *const PsVolume,
    fraction: f64,
    seed: u64,
    out_volume: *mut *mut PsVolume,
) -> PsStatus {
    guard(|| {
        let v = phantom::thin_dose(&deref(pet, "pet")?.0, fraction, &mut rng::seeded(seed))?;
        *out(out_volume, "out_volume")? = boxed(PsVolume(v));
        Ok(())
    })
}

/// Normalizes a volume; `out_offset` and `out_scale` (nullable) receive the
/// inverse-transform record.
#[no_mangle]
pub unsafe extern "C" fn ps_normalize(
    volume: *const PsVolume,
    mode: PsNormMode,
    out_volume: *mut *mut PsVolume,
    out_offset: *mut f64,
    out_scale: *mut f64,
) -> PsStatus {
    guard(|| {
        let mode = match mode {
            PsNormMode::UnitRange => NormMode::UnitRange,
            PsNormMode::SymmetricRange => NormMode::SymmetricRange,
            PsNormMode::MeanDivide => NormMode::MeanDivide,
        };
        let (v, rec) = phantom::normalize(&deref(volume, "volume")?.0, mode)?;
        *out(out_volume, "out_volume")? = boxed(PsVolume(v));
        if let Some(o) = out_offset.as_mut() {
            *o = rec.offset;
        }
        if let Some(o) = out_scale.as_mut() {
            *o = rec.scale;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_asymmetry_index(left: f64, right: f64, out_ai: *mut f64) -> PsStatus {
    guard(|| {
        if left + right <= 0.0 || (left + right).is_nan() {
            return Err(Fail::Arg("left + right must be positive".into()));
        }
        *out(out_ai, "out_ai")? = metrics::asymmetry(left, right);
        Ok(())
    })
}

/// Joint congruence over `n` paired asymmetry values.
#[no_mangle]
pub unsafe extern "C" fn ps_congruence_index(
    synth: *const f64,
    acquired: *const f64,
    n: usize,
    out_ci: *mut f64,
) -> PsStatus {
    guard(|| {
        let s = slice_arg(synth, n, "synth")?;
        let a = slice_arg(acquired, n, "acquired")?;
        // one pseudo-subject per pair keeps the joint average
        let rec = |v: f64| -> AsymmetryRecord { [(RoiName::FC, v)].into_iter().collect() };
        let s: Vec<_> = s.iter().map(|&v| rec(v)).collect();
        let a: Vec<_> = a.iter().map(|&v| rec(v)).collect();
        *out(out_ci, "out_ci")? = metrics::congruence_index(&s, &a)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_icc(acquired: *const f64, synth: *const f64, n: usize, out_icc: *mut f64) -> PsStatus {
    guard(|| {
        let a = slice_arg(acquired, n, "acquired")?;
        let s = slice_arg(synth, n, "synth")?;
        let pairs: Vec<(f64, f64)> = a.iter().copied().zip(s.iter().copied()).collect();
        *out(out_icc, "out_icc")? = metrics::icc(&pairs)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_t_interval(
    values: *const f64,
    n: usize,
    level: f64,
    out_low: *mut f64,
    out_high: *mut f64,
) -> PsStatus {
    guard(|| {
        let (lo, hi) = metrics::t_confidence_interval(slice_arg(values, n, "values")?, level)?;
        *out(out_low, "out_low")? = lo;
        *out(out_high, "out_high")? = hi;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_evaluate_subject(
    synth: *const PsVolume,
    acquired: *const PsVolume,
    labels: *const PsLabelMap,
    out_metrics: *mut PsSubjectMetrics,
) -> PsStatus {
    guard(|| {
        let s = EvalSubject {
            id: "subject",
            synth: &deref(synth, "synth")?.0,
            acquired: &deref(acquired, "acquired")?.0,
            labels: &deref(labels, "labels")?.0,
        };
        let m = &metrics::MetricsReport::evaluate(&[s])?.subjects[0];
        *out(out_metrics, "out_metrics")? = PsSubjectMetrics {
            congruence_index: m.ci,
            cmae: m.cmae,
            delta_suvr_mean: m.delta.mean_abs,
            delta_suvr_std: m.delta.std,
            icc: m.icc.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_model_read(path: *const c_char, out_model: *mut *mut PsModel) -> PsStatus {
    guard(|| {
        let m = score::load_model(path_arg(path, "path")?)?;
        *out(out_model, "out_model")? = boxed(PsModel(m));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ps_model_free(model: *mut PsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ps_model_cond_channels(model: *const PsModel, out_channels: *mut usize) -> PsStatus {
    guard(|| {
        *out(out_channels, "out_channels")? = deref(model, "model")?.0.config().cond_channels;
        Ok(())
    })
}

/// Synthesizes a unit-range PET volume on the grid of `t1w`. `t2f` and
/// `low_dose` may be null when `inputs` does not use them. `n_steps` sets the
/// sampler length (0 keeps the default for the model's scheme).
#[no_mangle]
pub unsafe extern "C" fn ps_sample_volume(
    model: *const PsModel,
    t1w: *const PsVolume,
    t2f: *const PsVolume,
    low_dose: *const PsVolume,
    inputs: PsInputCombo,
    n_steps: usize,
    seed: u64,
    out_volume: *mut *mut PsVolume,
) -> PsStatus {
    guard(|| {
        let net = &deref(model, "model")?.0;
        let t1w = &deref(t1w, "t1w")?.0;
        let combo = match inputs {
            PsInputCombo::T1w => InputCombo::T1w,
            PsInputCombo::T1wT2f => InputCombo::T1wT2f,
            PsInputCombo::T1wLowDose => InputCombo::T1wLowDose,
            PsInputCombo::T1wT2fLowDose => InputCombo::T1wT2fLowDose,
        };
        let mut cfg = SampleRunConfig {
            inputs: combo,
            ..Default::default()
        };
        if n_steps > 0 {
            cfg.sampler = Some(match net.config().scheme {
                Scheme::Kd => {
                    let mut k = KarrasSamplerConfig::default();
                    k.schedule.n_steps = n_steps;
                    k.schedule.sigma_data = net.config().sigma_data;
                    SamplerSettings::Karras(k)
                }
                Scheme::Vp => SamplerSettings::Pc(PcSamplerConfig {
                    n_predictor_steps: n_steps,
                    ..Default::default()
                }),
            });
        }
        let conds = phantom::prepare_conditions(
            t1w,
            t2f.as_ref().map(|v| &v.0),
            low_dose.as_ref().map(|v| &v.0),
            combo,
            &cfg.plan,
        )?;
        let v = synthesize_from(net, &conds, t1w.dims(), t1w.spacing(), &cfg, seed)?;
        *out(out_volume, "out_volume")? = boxed(PsVolume(v));
        Ok(())
    })
}
