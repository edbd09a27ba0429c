//! Seeded synthetic cohorts: ellipsoidal three-label tumors inside an
//! ellipsoidal brain, per-rater boundary perturbations, and outcome labels tied
//! to planted region intensities.
//!
//! Two signals are planted. T1, T2 and FLAIR intensity over the whole tumor
//! shift with the class, each with its own subject-level noise; raters perturb
//! the whole-tumor outline only mildly, so these features survive the
//! stability filter. T1Gd intensity of the thin
//! enhancing shell shifts more strongly with the class, but the shell borders
//! are where raters disagree and the surrounding tissue carries random
//! per-subject T1Gd levels, so rater masks corrupt that signal.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::descriptor::Channel;
use crate::error::{Error, Result};
use crate::manifest::{CohortManifest, SubjectLabel, SubjectRecord, Task};
use crate::seed;
use crate::volume::{
    write_label_mask, write_volume, Dtype, Geometry, LabelMask, VolumeGrid, LABEL_ENC, LABEL_NEC, LABEL_PTE,
};

/// Rater disagreement model. Scale and shift values are standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RaterNoise {
    /// Relative jitter of the whole-tumor semi-axes.
    pub wt_scale_sd: f64,
    /// Additive jitter (voxels) of the tumor-core semi-axes.
    pub core_shift_sd: f64,
    /// Additive jitter (voxels) of the necrosis semi-axes.
    pub nec_shift_sd: f64,
    /// Jitter (voxels) of the whole-tumor center.
    pub center_sd: f64,
}

impl RaterNoise {
    pub fn none() -> RaterNoise {
        RaterNoise {
            wt_scale_sd: 0.0,
            core_shift_sd: 0.0,
            nec_shift_sd: 0.0,
            center_sd: 0.0,
        }
    }
}

impl Default for RaterNoise {
    fn default() -> Self {
        RaterNoise {
            wt_scale_sd: 0.01,
            core_shift_sd: 2.0,
            nec_shift_sd: 2.0,
            center_sd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_discovery: usize,
    pub n_test: usize,
    /// Cubic grid edge length in voxels.
    pub grid: usize,
    pub spacing_mm: f64,
    pub n_raters: usize,
    pub task: Task,
    pub rater_noise: RaterNoise,
    /// Class shift of whole-tumor T1/T2/FLAIR levels, in subject-level standard deviations.
    pub stable_effect: f64,
    /// Class shift of enhancing-shell T1Gd level, in subject-level standard deviations.
    pub unstable_effect: f64,
    /// Voxelwise noise standard deviation.
    pub image_noise: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_discovery: 40,
            n_test: 20,
            grid: 48,
            spacing_mm: 1.0,
            n_raters: 7,
            task: Task::IDH,
            rater_noise: RaterNoise::default(),
            stable_effect: 1.8,
            unstable_effect: 4.0,
            image_noise: 8.0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.task.n_classes();
        if self.n_discovery < 2 * k || self.n_test < 2 * k {
            return Err(Error::InvalidInput(format!(
                "need at least {} subjects per cohort for {:?}",
                2 * k,
                self.task
            )));
        }
        if self.grid < 16 {
            return Err(Error::InvalidInput(format!("grid {} is below the minimum of 16", self.grid)));
        }
        if self.n_raters < 2 {
            return Err(Error::InvalidInput("at least two raters are required".into()));
        }
        let noise = &self.rater_noise;
        let sds = [
            noise.wt_scale_sd,
            noise.core_shift_sd,
            noise.nec_shift_sd,
            noise.center_sd,
            self.image_noise,
        ];
        if sds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(self.spacing_mm > 0.0) {
            return Err(Error::InvalidInput("noise levels must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn rater_names(&self) -> Vec<String> {
        (1..=self.n_raters).map(|r| format!("rater{r}")).collect()
    }
}

pub const TRUTH_RATER: &str = "manual";

#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    pub id: String,
    pub class: usize,
    pub age: f64,
    /// T1, T1Gd, T2, FLAIR.
    pub volumes: [VolumeGrid; 4],
    pub truth: LabelMask,
    pub raters: Vec<LabelMask>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub spec: CohortSpec,
    pub discovery: Vec<SyntheticSubject>,
    pub test: Vec<SyntheticSubject>,
}

#[derive(Debug, Clone, Copy)]
struct Ellipsoid {
    center: [f64; 3],
    axes: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).map(|a| ((p[a] - self.center[a]) / self.axes[a]).powi(2)).sum::<f64>() <= 1.0
    }
}

#[derive(Debug, Clone, Copy)]
struct TumorShape {
    wt: Ellipsoid,
    tc: Ellipsoid,
    nec: Ellipsoid,
}

impl TumorShape {
    fn label_at(&self, p: [f64; 3]) -> u8 {
        if self.nec.contains(p) {
            LABEL_NEC
        } else if self.tc.contains(p) {
            LABEL_ENC
        } else if self.wt.contains(p) {
            LABEL_PTE
        } else {
            0
        }
    }

    /// One rater's outline. Shift sds are in voxels of a 48-voxel grid and
    /// scale with `grid_scale`; nested surfaces stay at least a voxel apart.
    fn perturbed(&self, noise: &RaterNoise, grid_scale: f64, rng: &mut ChaCha8Rng) -> TumorShape {
        let mut draw = |sd: f64| if sd > 0.0 { Normal::new(0.0, sd).unwrap().sample(rng) } else { 0.0 };
        let mut out = *self;
        let dc = [draw(noise.center_sd), draw(noise.center_sd), draw(noise.center_sd)];
        let scale = 1.0 + draw(noise.wt_scale_sd);
        let core = draw(noise.core_shift_sd) * grid_scale;
        let nec = draw(noise.nec_shift_sd) * grid_scale;
        for a in 0..3 {
            for e in [&mut out.wt, &mut out.tc, &mut out.nec] {
                e.center[a] += dc[a];
            }
            out.nec.axes[a] = (self.nec.axes[a] + nec).max(1.0);
            out.tc.axes[a] = (self.tc.axes[a] + core).max(out.nec.axes[a] + 1.0);
            out.wt.axes[a] = (self.wt.axes[a] * scale).max(out.tc.axes[a] + 1.0);
        }
        out
    }
}

fn rasterize(shape: &TumorShape, brain: &[bool], g: Geometry) -> LabelMask {
    let labels = (0..g.len())
        .map(|i| {
            if !brain[i] {
                return 0;
            }
            let c = g.coords(i);
            shape.label_at([c[0] as f64, c[1] as f64, c[2] as f64])
        })
        .collect();
    LabelMask { geometry: g, labels }
}

/// Class offset centered on zero: -0.5 .. 0.5 across the classes.
fn class_offset(class: usize, n_classes: usize) -> f64 {
    class as f64 / (n_classes - 1) as f64 - 0.5
}

fn balanced_classes(n: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut y: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    y.shuffle(rng);
    y
}

fn make_subject(spec: &CohortSpec, id: String, class: usize, subject_seed: u64) -> SyntheticSubject {
    let n = spec.grid;
    let s = n as f64 / 48.0;
    let g = Geometry {
        dims: [n; 3],
        spacing_mm: [spec.spacing_mm; 3],
    };
    let mut rng = seed::rng(subject_seed);
    let mid = (n as f64 - 1.0) / 2.0;
    let brain_shape = Ellipsoid {
        center: [mid; 3],
        axes: [0.42 * n as f64, 0.45 * n as f64, 0.38 * n as f64],
    };
    let brain: Vec<bool> = (0..g.len())
        .map(|i| {
            let c = g.coords(i);
            brain_shape.contains([c[0] as f64, c[1] as f64, c[2] as f64])
        })
        .collect();

    let center: [f64; 3] = std::array::from_fn(|_| mid + rng.random_range(-0.12..0.12) * n as f64);
    let wt_axes: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.17..0.23) * n as f64);
    let tc_frac = rng.random_range(0.55..0.7);
    let shell = rng.random_range(2.0..3.0) * s;
    let tc_axes = wt_axes.map(|a| a * tc_frac);
    let nec_axes = tc_axes.map(|a| (a - shell).max(1.0));
    let shape = TumorShape {
        wt: Ellipsoid { center, axes: wt_axes },
        tc: Ellipsoid { center, axes: tc_axes },
        nec: Ellipsoid { center, axes: nec_axes },
    };
    let truth = rasterize(&shape, &brain, g);

    let k = spec.task.n_classes();
    let shift = class_offset(class, k);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut z = || std_normal.sample(&mut rng);
    let healthy = [100.0 + 5.0 * z(), 100.0 + 5.0 * z(), 100.0 + 5.0 * z(), 100.0 + 5.0 * z()];
    let t1_tumor = 70.0 + 10.0 * (z() - spec.stable_effect * shift);
    let t2_tumor = 150.0 + 15.0 * (z() + spec.stable_effect * shift);
    let flair_tumor = 160.0 + 15.0 * (z() + spec.stable_effect * shift);
    let enc_level = 200.0 + 15.0 * (z() + spec.unstable_effect * shift);
    let age = 50.0 + 12.0 * z();
    let nec_level = rng.random_range(20.0..380.0);
    let pte_level = rng.random_range(20.0..380.0);

    let noise = Normal::new(0.0, spec.image_noise.max(f64::MIN_POSITIVE)).unwrap();
    let mut channels: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; g.len()]);
    for i in 0..g.len() {
        if !brain[i] {
            continue;
        }
        let label = truth.labels[i];
        let levels = match label {
            0 => healthy,
            LABEL_NEC => [t1_tumor, nec_level, t2_tumor, flair_tumor],
            LABEL_ENC => [t1_tumor, enc_level, t2_tumor, flair_tumor],
            _ => [t1_tumor, pte_level, t2_tumor, flair_tumor],
        };
        for (c, level) in levels.iter().enumerate() {
            let e = if spec.image_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            // Stored as f32 on disk; round here so in-memory and on-disk cohorts agree.
            channels[c][i] = ((level + e).max(1.0) as f32) as f64;
        }
    }
    let volumes = channels.map(|values| VolumeGrid { geometry: g, values });

    let raters = (0..spec.n_raters as u64)
        .map(|r| {
            let mut rr = seed::rng(seed::derive(subject_seed, 1000 + r));
            rasterize(&shape.perturbed(&spec.rater_noise, s, &mut rr), &brain, g)
        })
        .collect();
    SyntheticSubject {
        id,
        class,
        age: (age * 10.0).round() / 10.0,
        volumes,
        truth,
        raters,
    }
}

/// Generate a cohort fully determined by `spec` and `seed`.
pub fn synthesize(spec: &CohortSpec, seed: u64) -> Result<SyntheticCohort> {
    spec.validate()?;
    let k = spec.task.n_classes();
    let mut rng = seed::rng(seed::derive_named(seed, "labels"));
    let y_disc = balanced_classes(spec.n_discovery, k, &mut rng);
    let y_test = balanced_classes(spec.n_test, k, &mut rng);
    let disc_seed = seed::derive_named(seed, "discovery");
    let test_seed = seed::derive_named(seed, "test");
    let discovery = y_disc
        .iter()
        .enumerate()
        .map(|(i, &c)| make_subject(spec, format!("D{:03}", i + 1), c, seed::derive(disc_seed, i as u64)))
        .collect();
    let test = y_test
        .iter()
        .enumerate()
        .map(|(i, &c)| make_subject(spec, format!("T{:03}", i + 1), c, seed::derive(test_seed, i as u64)))
        .collect();
    Ok(SyntheticCohort {
        spec: spec.clone(),
        discovery,
        test,
    })
}

#[derive(Debug, Clone)]
pub struct WrittenCohort {
    pub discovery_manifest: PathBuf,
    pub test_manifest: PathBuf,
}

fn write_subjects(subjects: &[SyntheticSubject], task: Task, root: &Path, spec: &CohortSpec) -> Result<CohortManifest> {
    let mut records = Vec::with_capacity(subjects.len());
    for s in subjects {
        let dir = root.join("subjects").join(&s.id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let rel = PathBuf::from("subjects").join(&s.id);
        let mut volumes = BTreeMap::new();
        for (ch, vol) in Channel::IMAGING.iter().zip(&s.volumes) {
            let name = format!("{}.rawvol", ch.token());
            write_volume(vol, &dir.join(&name), Dtype::F32Le)?;
            volumes.insert(ch.token().to_string(), rel.join(name));
        }
        let mut masks = BTreeMap::new();
        let named = std::iter::once((TRUTH_RATER.to_string(), &s.truth))
            .chain(spec.rater_names().into_iter().zip(&s.raters));
        for (rater, mask) in named {
            let name = format!("mask_{rater}.rawvol");
            write_label_mask(mask, &dir.join(&name))?;
            masks.insert(rater, rel.join(name));
        }
        records.push(SubjectRecord {
            id: s.id.clone(),
            volumes,
            masks,
            label: Some(SubjectLabel {
                task,
                value: s.class as i64,
            }),
            age: Some(s.age),
        });
    }
    Ok(CohortManifest { subjects: records })
}

/// Write volumes, masks and the two manifests under `root`. Paths inside the
/// manifests are relative to `root`.
pub fn write_cohort(cohort: &SyntheticCohort, root: &Path) -> Result<WrittenCohort> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let out = WrittenCohort {
        discovery_manifest: root.join("discovery.json"),
        test_manifest: root.join("test.json"),
    };
    let task = cohort.spec.task;
    write_subjects(&cohort.discovery, task, root, &cohort.spec)?.save(&out.discovery_manifest)?;
    write_subjects(&cohort.test, task, root, &cohort.spec)?.save(&out.test_manifest)?;
    Ok(out)
}

/// Generate and write a cohort in one step.
pub fn make_synthetic_cohort(spec: &CohortSpec, seed: u64, root: &Path) -> Result<WrittenCohort> {
    write_cohort(&synthesize(spec, seed)?, root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::derive_regions;

    fn small() -> CohortSpec {
        CohortSpec {
            n_discovery: 4,
            n_test: 4,
            grid: 24,
            ..CohortSpec::default()
        }
    }

    #[test]
    fn zero_noise_raters_match_truth() {
        let spec = CohortSpec {
            rater_noise: RaterNoise::none(),
            ..small()
        };
        let c = synthesize(&spec, 3).unwrap();
        for s in c.discovery.iter().chain(&c.test) {
            assert_eq!(s.raters.len(), 7);
            assert!(s.raters.iter().all(|r| r.labels == s.truth.labels));
        }
    }

    #[test]
    fn tumors_are_nested_and_nonempty() {
        let c = synthesize(&small(), 5).unwrap();
        for s in &c.discovery {
            for m in std::iter::once(&s.truth).chain(&s.raters) {
                let r = derive_regions(m).unwrap();
                assert!(r.enc.count() > 0 && r.nec.count() > 0 && r.pte.count() > 0);
                assert!(r.enc.is_subset_of(&r.tc) && r.tc.is_subset_of(&r.wt));
            }
        }
    }

    #[test]
    fn classes_are_balanced() {
        let c = synthesize(&small(), 1).unwrap();
        let ones = c.discovery.iter().filter(|s| s.class == 1).count();
        assert_eq!(ones, 2);
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = small();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        make_synthetic_cohort(&spec, 9, a.path()).unwrap();
        make_synthetic_cohort(&spec, 9, b.path()).unwrap();
        for rel in ["discovery.json", "test.json", "subjects/D001/FLAIR.raw", "subjects/T004/mask_rater7.raw"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
        }
    }

    #[test]
    fn degenerate_spec_rejected() {
        let spec = CohortSpec {
            n_raters: 1,
            ..small()
        };
        assert!(synthesize(&spec, 0).is_err());
        let spec = CohortSpec { grid: 8, ..small() };
        assert!(synthesize(&spec, 0).is_err());
    }
}
