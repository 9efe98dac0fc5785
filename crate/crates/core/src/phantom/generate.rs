use rand::Rng;

use crate::error::{Error, Result};
use crate::labels::{canonical_label, canonical_table, RoiLabelMap, RoiName, Side};
use crate::rng;
use crate::volume::{Units, Volume};

use super::smooth::{fwhm_to_sigma, gaussian_smooth, smoothed_noise_std};
use super::spec::PhantomSpec;

/// Co-registered contrasts, full-dose PET and labels of one phantom subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub t1w: Volume,
    pub t2f: Volume,
    pub pet_full: Volume,
    pub labels: RoiLabelMap,
}

/// Noise-free piecewise-constant images on the phantom grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomLayout {
    pub labels: RoiLabelMap,
    pub uptake: Vec<f64>,
    pub t1w: Vec<f64>,
    pub t2f: Vec<f64>,
}

struct Placed {
    label: i32,
    priority: u32,
    center: [f64; 3],
    axes: [f64; 3],
    half: Side,
    uptake: f64,
    t1w: f64,
    t2f: f64,
}

fn coord(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64 * 2.0 - 1.0
}

fn place(spec: &PhantomSpec, rng: &mut rng::SeededRng) -> Vec<Placed> {
    let j = spec.jitter;
    let draw = |rng: &mut rng::SeededRng| if j > 0.0 { rng.random_range(-j..j) } else { 0.0 };
    let scale = [1.0 + draw(rng), 1.0 + draw(rng), 1.0 + draw(rng)];
    let mut placed = Vec::new();
    for r in &spec.rois {
        let shift = [draw(rng), draw(rng), draw(rng)];
        let base = |sign: f64| -> ([f64; 3], [f64; 3]) {
            let mut c = [0.0; 3];
            let mut a = [0.0; 3];
            for k in 0..3 {
                c[k] = r.center[k] * scale[k] + shift[k];
                a[k] = r.axes[k] * scale[k];
            }
            c[0] *= sign;
            (c, a)
        };
        if r.name.is_lateralized() {
            for (side, sign) in [(Side::Left, 1.0), (Side::Right, -1.0)] {
                let (center, axes) = base(sign);
                let kept = spec.retained(r.name, side);
                let lost = 1.0 - kept;
                placed.push(Placed {
                    label: canonical_label(r.name, side),
                    priority: r.priority,
                    center,
                    axes,
                    half: side,
                    uptake: r.uptake * kept,
                    t1w: r.t1w * (1.0 - spec.coupling.t1w * lost),
                    t2f: r.t2f * (1.0 + spec.coupling.t2f * lost),
                });
            }
        } else {
            let (mut center, axes) = base(1.0);
            center[0] = r.center[0] * scale[0];
            placed.push(Placed {
                label: canonical_label(r.name, Side::None),
                priority: r.priority,
                center,
                axes,
                half: Side::None,
                uptake: r.uptake,
                t1w: r.t1w,
                t2f: r.t2f,
            });
        }
    }
    placed.sort_by_key(|p| p.priority);
    placed
}

fn layout_with(spec: &PhantomSpec, rng: &mut rng::SeededRng) -> Result<PhantomLayout> {
    spec.validate()?;
    let placed = place(spec, rng);
    let [nx, ny, nz] = spec.dims;
    let n = nx * ny * nz;
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for z in 0..nz {
        let w = coord(z, nz);
        for y in 0..ny {
            let v = coord(y, ny);
            for x in 0..nx {
                let u = coord(x, nx);
                let idx = x + nx * (y + ny * z);
                for (pi, p) in placed.iter().enumerate() {
                    match p.half {
                        Side::Left if u >= 0.0 => continue,
                        Side::Right if u <= 0.0 => continue,
                        _ => {}
                    }
                    let d = ((u - p.center[0]) / p.axes[0]).powi(2)
                        + ((v - p.center[1]) / p.axes[1]).powi(2)
                        + ((w - p.center[2]) / p.axes[2]).powi(2);
                    if d > 1.0 {
                        continue;
                    }
                    if let Some(prev) = owner[idx] {
                        if placed[prev].priority == p.priority && placed[prev].label != p.label {
                            return Err(Error::Config(format!(
                                "labels {} and {} overlap with equal priority {}",
                                placed[prev].label, p.label, p.priority
                            )));
                        }
                    }
                    owner[idx] = Some(pi);
                }
            }
        }
    }
    let pick = |f: fn(&Placed) -> f64| -> Vec<f64> {
        owner.iter().map(|o| o.map_or(0.0, |i| f(&placed[i]))).collect()
    };
    let labels: Vec<i32> = owner.iter().map(|o| o.map_or(0, |i| placed[i].label)).collect();
    let labels = RoiLabelMap::new(spec.dims, spec.spacing, labels, canonical_table())?;
    for (&label, info) in labels.table() {
        if !labels.labels().contains(&label) {
            return Err(Error::Config(format!(
                "{} {:?} is empty on a {:?} grid; enlarge it or raise its priority",
                info.name, info.side, spec.dims
            )));
        }
    }
    Ok(PhantomLayout {
        uptake: pick(|p| p.uptake),
        t1w: pick(|p| p.t1w),
        t2f: pick(|p| p.t2f),
        labels,
    })
}

/// Region geometry and noise-free images for `spec`, with the same jitter
/// draw that [`generate_phantom`] uses.
pub fn phantom_layout(spec: &PhantomSpec) -> Result<PhantomLayout> {
    layout_with(spec, &mut rng::seeded(spec.seed))
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let mut rng = rng::seeded(spec.seed);
    let layout = layout_with(spec, &mut rng)?;
    let dims = spec.dims;
    let n = layout.uptake.len();

    let sigma_mm = fwhm_to_sigma(spec.noise.pet_fwhm_mm);
    let sigma = [0, 1, 2].map(|k| sigma_mm / spec.spacing[k]);
    let mut white = vec![0.0; n];
    rng::fill_standard_normal(&mut rng, &mut white);
    let norm = smoothed_noise_std(sigma);
    let texture = gaussian_smooth(&white, dims, sigma);
    let pet: Vec<f32> = layout
        .uptake
        .iter()
        .zip(&texture)
        .map(|(&u, &t)| (u * (1.0 + spec.noise.pet_relative * t / norm)).max(0.0).round() as f32)
        .collect();

    let mut mri = |levels: &[f64]| -> Vec<f32> {
        let mut noise = vec![0.0; n];
        rng::fill_standard_normal(&mut rng, &mut noise);
        levels
            .iter()
            .zip(&noise)
            .map(|(&l, &e)| (l + spec.noise.mri_sigma * e).max(0.0) as f32)
            .collect()
    };
    let t1w = mri(&layout.t1w);
    let t2f = mri(&layout.t2f);

    Ok(Phantom {
        t1w: Volume::new(dims, spec.spacing, Units::Arbitrary, t1w)?,
        t2f: Volume::new(dims, spec.spacing, Units::Arbitrary, t2f)?,
        pet_full: Volume::new(dims, spec.spacing, Units::Counts, pet)?,
        labels: layout.labels,
    })
}

/// Mean of `values` over a region side.
pub fn region_mean(values: &[f64], labels: &RoiLabelMap, name: RoiName, side: Side) -> Option<f64> {
    let mask = labels.mask(name, side);
    let (s, c) = values
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::spec::Asymmetry;

    fn small() -> PhantomSpec {
        PhantomSpec {
            dims: [32, 32, 17],
            spacing: [6.0, 6.0, 9.0],
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn every_region_present_on_default_and_small_grids() {
        for spec in [PhantomSpec::default(), small()] {
            let l = phantom_layout(&spec).unwrap();
            let areas = l.labels.areas();
            assert_eq!(areas.len(), 10);
            let cwm = areas[&RoiName::CWM];
            assert!(areas.values().all(|&a| a <= cwm), "{areas:?}");
        }
    }

    #[test]
    fn pre_noise_asymmetry_is_exact() {
        let l = phantom_layout(&PhantomSpec::default()).unwrap();
        let left = region_mean(&l.uptake, &l.labels, RoiName::TC, Side::Left).unwrap();
        let right = region_mean(&l.uptake, &l.labels, RoiName::TC, Side::Right).unwrap();
        assert!((left / right - 0.8).abs() < 1e-12);
        let fc_l = region_mean(&l.uptake, &l.labels, RoiName::FC, Side::Left).unwrap();
        let fc_r = region_mean(&l.uptake, &l.labels, RoiName::FC, Side::Right).unwrap();
        assert_eq!(fc_l, fc_r);
    }

    #[test]
    fn mirror_symmetric_geometry() {
        let spec = small();
        let l = phantom_layout(&spec).unwrap();
        let [nx, ny, nz] = spec.dims;
        let lab = l.labels.labels();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let a = l.labels.info(lab[x + nx * (y + ny * z)]);
                    let b = l.labels.info(lab[nx - 1 - x + nx * (y + ny * z)]);
                    match (a, b) {
                        (None, None) => {}
                        (Some(a), Some(b)) => {
                            assert_eq!(a.name, b.name);
                            assert_eq!(a.side, b.side.opposite());
                        }
                        _ => panic!("asymmetric labels at {x} {y} {z}"),
                    }
                }
            }
        }
    }

    #[test]
    fn symmetric_phantom_has_equal_hemispheres_within_noise() {
        let spec = PhantomSpec {
            asymmetry: vec![],
            ..PhantomSpec::default()
        };
        let p = generate_phantom(&spec).unwrap();
        let pet: Vec<f64> = p.pet_full.data().iter().map(|&v| v as f64).collect();
        for name in RoiName::LATERALIZED {
            let l = region_mean(&pet, &p.labels, name, Side::Left).unwrap();
            let r = region_mean(&pet, &p.labels, name, Side::Right).unwrap();
            assert!((l - r).abs() / (l + r) < 0.01, "{name}: {l} {r}");
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical_and_seeds_differ() {
        let a = generate_phantom(&small()).unwrap();
        let b = generate_phantom(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_phantom(&PhantomSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.pet_full, c.pet_full);
    }

    #[test]
    fn pet_is_counts_and_mri_is_coupled() {
        let spec = PhantomSpec::default();
        let l = phantom_layout(&spec).unwrap();
        let t1_l = region_mean(&l.t1w, &l.labels, RoiName::TC, Side::Left).unwrap();
        let t1_r = region_mean(&l.t1w, &l.labels, RoiName::TC, Side::Right).unwrap();
        assert!((t1_l / t1_r - 0.9).abs() < 1e-12);
        let p = generate_phantom(&spec).unwrap();
        assert_eq!(p.pet_full.units(), Units::Counts);
        assert!(p.pet_full.data().iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
    }

    #[test]
    fn equal_priority_overlap_is_rejected() {
        let mut spec = small();
        for r in spec.rois.iter_mut() {
            r.priority = 1;
        }
        assert!(matches!(phantom_layout(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_fraction_is_rejected() {
        let spec = PhantomSpec {
            asymmetry: vec![Asymmetry {
                roi: RoiName::TC,
                side: Side::Left,
                fraction: 1.0,
            }],
            ..small()
        };
        assert!(spec.validate().is_err());
    }
}
