use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pet_sgm_ffi::*;

fn last_error() -> String {
    let p = ps_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn volume_round_trip_through_handles() {
    let dims = [2usize, 3, 1];
    let spacing = [1.0, 1.0, 2.0];
    let data: Vec<f32> = (0..6).map(|i| i as f32).collect();
    let mut v = ptr::null_mut();
    unsafe {
        assert_eq!(ps_volume_new(dims.as_ptr(), spacing.as_ptr(), PsUnits::Counts, data.as_ptr(), &mut v), PsStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let stem = CString::new(dir.path().join("v").to_str().unwrap()).unwrap();
        assert_eq!(ps_volume_write(v, stem.as_ptr()), PsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ps_volume_read(stem.as_ptr(), &mut back), PsStatus::Ok);
        let mut out_dims = [0usize; 3];
        assert_eq!(ps_volume_dims(back, out_dims.as_mut_ptr()), PsStatus::Ok);
        assert_eq!(out_dims, dims);
        let mut p = ptr::null();
        let mut n = 0;
        assert_eq!(ps_volume_data(back, &mut p, &mut n), PsStatus::Ok);
        assert_eq!(std::slice::from_raw_parts(p, n), &data[..]);
        ps_volume_free(back);

        let mut thinned = ptr::null_mut();
        assert_eq!(ps_thin_dose(v, 1.0, 0, &mut thinned), PsStatus::Ok);
        ps_volume_free(thinned);
        assert_eq!(ps_thin_dose(v, 0.0, 0, &mut thinned), PsStatus::Domain);
        ps_volume_free(v);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut v = ptr::null_mut();
        let missing = CString::new("/nonexistent/volume").unwrap();
        assert_eq!(ps_volume_read(missing.as_ptr(), &mut v), PsStatus::Io);
        assert!(last_error().contains("nonexistent"));
        assert_eq!(ps_volume_read(ptr::null(), &mut v), PsStatus::NullPointer);
        let data = [1.5f32];
        let dims = [1usize, 1, 1];
        let sp = [1.0; 3];
        assert_eq!(ps_volume_new(dims.as_ptr(), sp.as_ptr(), PsUnits::Counts, data.as_ptr(), &mut v), PsStatus::Domain);
        let mut ci = 0.0;
        let a = [0.1, -0.2];
        assert_eq!(ps_congruence_index(a.as_ptr(), a.as_ptr(), 2, &mut ci), PsStatus::Ok);
        assert_eq!(ci, 1.0);
        assert_eq!(ps_congruence_index(a.as_ptr(), a.as_ptr(), 0, &mut ci), PsStatus::InvalidArgument);
    }
}

#[test]
fn metrics_entry_points() {
    unsafe {
        let vals = [0.8, 0.9, 1.0];
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(ps_t_interval(vals.as_ptr(), 3, 0.95, &mut lo, &mut hi), PsStatus::Ok);
        assert!((lo - 0.6516).abs() < 1e-4 && (hi - 1.1484).abs() < 1e-4);
        let mut ai = 0.0;
        assert_eq!(ps_asymmetry_index(1.2, 1.0, &mut ai), PsStatus::Ok);
        assert!((ai - 0.2 / 2.2).abs() < 1e-15);

        let (mut pet, mut labels, mut t1) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(ps_phantom_generate(1, 0.2, &mut t1, ptr::null_mut(), &mut pet, &mut labels), PsStatus::Ok);
        let mut norm = ptr::null_mut();
        let (mut off, mut scale) = (0.0, 0.0);
        assert_eq!(ps_normalize(pet, PsNormMode::MeanDivide, &mut norm, &mut off, &mut scale), PsStatus::Ok);
        assert!(scale > 0.0 && off == 0.0);
        let mut m = PsSubjectMetrics { congruence_index: 0.0, cmae: 1.0, delta_suvr_mean: 1.0, delta_suvr_std: 1.0, icc: 0.0 };
        assert_eq!(ps_evaluate_subject(pet, pet, labels, &mut m), PsStatus::Ok);
        assert_eq!((m.congruence_index, m.cmae, m.icc), (1.0, 0.0, 1.0));
        for v in [pet, norm, t1] {
            ps_volume_free(v);
        }
        ps_labels_free(labels);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let include = crate_dir.join("include");
    let src = crate_dir.join("tests/c/smoke.c");
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(status.success(), "header does not compile");

    let lib = target_dir().join("libpet_sgm_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; link step skipped", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "link failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
