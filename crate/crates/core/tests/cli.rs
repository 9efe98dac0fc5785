use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use pet_sgm::cli::{main_with, net_config, Manifest, TrainRunConfig};
use pet_sgm::labels::RoiLabelMap;
use pet_sgm::rng;
use pet_sgm::score::{load_model, PatchNet};
use pet_sgm::Volume;

const SMALL: &str = "[phantom]\nseed = 9\ndims = [32, 32, 17]\nspacing = [6.0, 6.0, 9.0]\n";

fn cli(args: &[&str]) -> i32 {
    main_with(std::iter::once("pet-sgm").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("phantom.toml");
    std::fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn single_phantom_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        assert_eq!(cli(&["phantom", "--config", s(&cfg), "--seed", seed, "--out", s(&out)]), 0);
        let m = Manifest::read(&out.join("phantom.manifest.json")).unwrap();
        m.outputs.into_values().collect::<Vec<_>>()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_ne!(a, run("c", "2"));
}

#[test]
fn cohort_members_get_distinct_seeds_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cohort");
    assert_eq!(cli(&["phantom", "--config", s(&cfg), "--n-subjects", "12", "--out", s(&out)]), 0);
    let m = Manifest::read(&out.join("phantom.manifest.json")).unwrap();
    let seeds: BTreeSet<u64> = m.seeds.values().copied().collect();
    assert_eq!(seeds.len(), 12);
    let images: BTreeSet<Vec<u32>> = (0..12)
        .map(|i| {
            let v = Volume::read(out.join(format!("sub-{i:03}/pet_full"))).unwrap();
            v.data().iter().map(|x| x.to_bits()).collect()
        })
        .collect();
    assert_eq!(images.len(), 12);
}

#[test]
fn full_fraction_thinning_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sub = dir.path().join("sub");
    assert_eq!(cli(&["phantom", "--config", s(&cfg), "--out", s(&sub)]), 0);
    assert_eq!(cli(&["thin", "--input", s(&sub), "--fraction", "1.0"]), 0);
    let full = Volume::read(sub.join("pet_full")).unwrap();
    let low = Volume::read(sub.join("pet_low")).unwrap();
    assert_eq!(full, low);
    assert!(sub.join("thin.manifest.json").exists());
}

#[test]
fn zero_step_training_returns_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sub = dir.path().join("sub");
    assert_eq!(cli(&["phantom", "--config", s(&cfg), "--out", s(&sub)]), 0);
    let out = dir.path().join("model");
    assert_eq!(cli(&["train", "--subjects", s(&sub), "--steps", "0", "--seed", "3", "--out", s(&out)]), 0);
    let trained = load_model(out.join("model.bin")).unwrap();
    let tcfg = TrainRunConfig::default();
    let init = PatchNet::new(net_config(&tcfg), rng::derive_seed(3, 1)).unwrap();
    assert_eq!(trained, init);
    let trace = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);

    assert_eq!(cli(&["train", "--subjects", s(&sub), "--steps", "4", "--out", s(&out)]), 0);
    let trace = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
}

#[test]
fn self_comparison_is_perfectly_congruent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let sub = dir.path().join("sub");
    assert_eq!(cli(&["phantom", "--config", s(&cfg), "--out", s(&sub)]), 0);
    let eval = dir.path().join("eval.toml");
    std::fs::write(
        &eval,
        format!(
            "[[pairs]]\nid = \"self\"\nsynth = \"{0}/pet_full\"\nacquired = \"{0}/pet_full\"\nlabels = \"{0}/labels\"\n",
            s(&sub)
        ),
    )
    .unwrap();
    let out = dir.path().join("eval");
    assert_eq!(cli(&["evaluate", "--config", s(&eval), "--out", s(&out)]), 0);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let text = summary.to_string();
    assert!(text.contains("congruence_index"), "{text}");
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "self,congruence_index,1"), "{csv}");
    assert!(csv.lines().any(|l| l == "self,cmae,0"), "{csv}");
    RoiLabelMap::read(sub.join("labels")).unwrap();
}

fn binary(args: &[&str], cwd: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pet-sgm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn exit_codes_separate_configuration_from_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(binary(&["--help"], d), 0);
    assert_eq!(binary(&["--version"], d), 0);
    assert_eq!(binary(&["frobnicate"], d), 2);
    assert_eq!(binary(&["phantom", "--config", "missing.toml"], d), 2);
    std::fs::write(d.join("bad.toml"), "[phantom]\nunknown_key = 1\n").unwrap();
    assert_eq!(binary(&["phantom", "--config", "bad.toml"], d), 2);
    assert_eq!(binary(&["thin", "--input", "nowhere", "--fraction", "0"], d), 2);
    assert_eq!(binary(&["sample", "--model", "missing.bin", "--subjects", "."], d), 3);
    assert_eq!(binary(&["phantom", "--out", "sub"], d), 0);
    assert!(d.join("sub/pet_full.raw").exists());
}
