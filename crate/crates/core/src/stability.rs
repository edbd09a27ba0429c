//! Inter-rater agreement (CCC, overall CCC, ICC(2,1)) and the stability filter
//! that defines the robust feature pool.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{FeatureDescriptor, Region, BRAIN_SHAPE_NAMES};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::tableprep::scaled_mad;

fn check_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Mean, population variance.
fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n)
}

fn covariance(x: &[f64], mx: f64, y: &[f64], my: f64) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64
}

/// Lin's concordance correlation coefficient with population moments.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x, y)?;
    occc(&[x, y])
}

/// Overall CCC: twice the summed pairwise covariances over the summed pairwise
/// CCC denominators.
pub fn occc(raters: &[&[f64]]) -> Result<f64> {
    if raters.len() < 2 {
        return Err(Error::InvalidInput("at least two raters are required".into()));
    }
    for r in &raters[1..] {
        check_len(raters[0], r)?;
    }
    let m: Vec<(f64, f64)> = raters.iter().map(|r| moments(r)).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..raters.len() {
        for k in j + 1..raters.len() {
            num += 2.0 * covariance(raters[j], m[j].0, raters[k], m[k].0);
            den += m[j].1 + m[k].1 + (m[j].0 - m[k].0).powi(2);
        }
    }
    Ok(if den > 0.0 { num / den } else { f64::NAN })
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
pub fn icc21(raters: &[&[f64]]) -> Result<f64> {
    let k = raters.len();
    if k < 2 {
        return Err(Error::InvalidInput("at least two raters are required".into()));
    }
    for r in &raters[1..] {
        check_len(raters[0], r)?;
    }
    let n = raters[0].len();
    let (nf, kf) = (n as f64, k as f64);
    let grand = raters.iter().flat_map(|r| r.iter()).sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = (0..n).map(|i| raters.iter().map(|r| r[i]).sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = raters.iter().map(|r| r.iter().sum::<f64>() / nf).collect();
    let ss_total: f64 = raters.iter().flat_map(|r| r.iter()).map(|v| (v - grand).powi(2)).sum();
    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_err = ss_total - ss_rows - ss_cols;
    let ms_r = ss_rows / (nf - 1.0);
    let ms_c = ss_cols / (kf - 1.0);
    let ms_e = ss_err / ((nf - 1.0) * (kf - 1.0));
    let den = ms_r + (kf - 1.0) * ms_e + kf / nf * (ms_c - ms_e);
    Ok(if den != 0.0 { (ms_r - ms_e) / den } else { f64::NAN })
}

/// One feature matrix per rater over identical subjects and descriptors.
#[derive(Debug, Clone)]
pub struct RaterStack {
    pub rater_names: Vec<String>,
    pub matrices: Vec<FeatureMatrix>,
}

impl RaterStack {
    pub fn new(rater_names: Vec<String>, matrices: Vec<FeatureMatrix>) -> Result<RaterStack> {
        if matrices.len() < 2 || rater_names.len() != matrices.len() {
            return Err(Error::InvalidInput(format!(
                "need at least two raters with one matrix each (got {} names, {} matrices)",
                rater_names.len(),
                matrices.len()
            )));
        }
        let first = &matrices[0];
        for m in &matrices[1..] {
            if m.subject_ids != first.subject_ids || m.descriptors != first.descriptors {
                return Err(Error::InvalidInput(
                    "rater matrices must share subject and descriptor order".into(),
                ));
            }
        }
        Ok(RaterStack { rater_names, matrices })
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.matrices[0].descriptors
    }

    fn columns(&self, col: usize) -> Vec<Vec<f64>> {
        self.matrices.iter().map(|m| m.column(col)).collect()
    }

    /// Segmentation-dependent descriptors whose pooled rater values have a
    /// nonzero scaled MAD.
    pub fn candidates(&self) -> Vec<FeatureDescriptor> {
        (0..self.descriptors().len())
            .into_par_iter()
            .filter(|&c| {
                if self.descriptors()[c].is_segmentation_independent() {
                    return false;
                }
                let pooled: Vec<f64> = self.columns(c).concat();
                matches!(scaled_mad(&pooled), Ok(m) if m > 0.0)
            })
            .map(|c| self.descriptors()[c].clone())
            .collect()
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub descriptor: FeatureDescriptor,
    #[serde(with = "nan_as_null")]
    pub occc: f64,
    #[serde(with = "nan_as_null")]
    pub icc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub tau: f64,
    pub raters: Vec<String>,
    pub entries: Vec<StabilityEntry>,
    pub retained: Vec<FeatureDescriptor>,
}

impl StabilityReport {
    /// Retained descriptors plus the segmentation-independent ones (brain
    /// shape, and Age when requested).
    pub fn augmented_pool(&self, include_age: bool) -> Vec<FeatureDescriptor> {
        let mut out = self.retained.clone();
        for name in BRAIN_SHAPE_NAMES {
            out.push(FeatureDescriptor::shape(Region::Brain, name));
        }
        if include_age {
            out.push(FeatureDescriptor::age());
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("stability report", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<StabilityReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

/// OCCC (and ICC) of every descriptor in `descriptors`; retains finite OCCC >= tau.
pub fn stability_filter_on(stack: &RaterStack, descriptors: &[FeatureDescriptor], tau: f64) -> Result<StabilityReport> {
    let index = stack.matrices[0].column_index();
    let cols = descriptors
        .iter()
        .map(|d| index.get(d).copied().ok_or_else(|| Error::Unfitted(d.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let entries = cols
        .par_iter()
        .zip(descriptors)
        .map(|(&c, d)| {
            let cols = stack.columns(c);
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            Ok(StabilityEntry {
                descriptor: d.clone(),
                occc: occc(&refs)?,
                icc: icc21(&refs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let retained = entries
        .iter()
        .filter(|e| e.occc.is_finite() && e.occc >= tau)
        .map(|e| e.descriptor.clone())
        .collect();
    Ok(StabilityReport {
        tau,
        raters: stack.rater_names.clone(),
        entries,
        retained,
    })
}

/// Stability filter over the pre-filtered candidate set of the stack.
pub fn stability_filter(stack: &RaterStack, tau: f64) -> Result<StabilityReport> {
    stability_filter_on(stack, &stack.candidates(), tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{Channel, Family, FilterKind};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn ccc_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(ccc(&x, &x).unwrap(), 1.0);
        assert!((ccc(&x, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((ccc(&x, &[2.0, 3.0, 4.0]).unwrap() - 4.0 / 7.0).abs() < 1e-15);
        assert!(ccc(&x, &[1.0]).is_err());
        assert!(ccc(&[2.0; 3], &[2.0; 3]).unwrap().is_nan());
    }

    fn weighted_pairwise(raters: &[Vec<f64>]) -> (f64, f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..raters.len() {
            for k in j + 1..raters.len() {
                let (mj, vj) = moments(&raters[j]);
                let (mk, vk) = moments(&raters[k]);
                let w = vj + vk + (mj - mk).powi(2);
                let c = ccc(&raters[j], &raters[k]).unwrap();
                num += w * c;
                den += w;
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
        (num / den, lo, hi)
    }

    #[test]
    fn occc_reduces_to_pairwise() {
        let mut rng = crate::seed::rng(4);
        let x: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        assert_eq!(occc(&[&x, &y]).unwrap(), ccc(&x, &y).unwrap());
        assert!((occc(&[&x, &x, &x]).unwrap() - 1.0).abs() < 1e-15);
        let raters: Vec<Vec<f64>> = (0..3).map(|_| (0..15).map(|_| rng.random()).collect()).collect();
        let refs: Vec<&[f64]> = raters.iter().map(Vec::as_slice).collect();
        let (w, _, _) = weighted_pairwise(&raters);
        assert!((occc(&refs).unwrap() - w).abs() < 1e-12);
    }

    /// Oracle: sums of squares accumulated cell by cell.
    fn icc_oracle(y: &[[f64; 3]; 4]) -> f64 {
        let (n, k) = (4.0, 3.0);
        let mut grand = 0.0;
        for row in y {
            for v in row {
                grand += v / (n * k);
            }
        }
        let (mut sst, mut ssr, mut ssc) = (0.0, 0.0, 0.0);
        for row in y {
            let rm: f64 = row.iter().sum::<f64>() / k;
            ssr += k * (rm - grand) * (rm - grand);
            for v in row {
                sst += (v - grand) * (v - grand);
            }
        }
        for j in 0..3 {
            let cm: f64 = y.iter().map(|r| r[j]).sum::<f64>() / n;
            ssc += n * (cm - grand) * (cm - grand);
        }
        let msr = ssr / (n - 1.0);
        let msc = ssc / (k - 1.0);
        let mse = (sst - ssr - ssc) / ((n - 1.0) * (k - 1.0));
        (msr - mse) / (msr + (k - 1.0) * mse + k * (msc - mse) / n)
    }

    #[test]
    fn icc_examples() {
        let x: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        assert!((icc21(&[&x, &x, &x]).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = crate::seed::rng(5);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..10.0)).collect();
        let shifted: Vec<Vec<f64>> = (0..3).map(|j| x.iter().map(|v| v + j as f64).collect()).collect();
        let refs: Vec<&[f64]> = shifted.iter().map(Vec::as_slice).collect();
        assert!(icc21(&refs).unwrap() < 1.0);
        let mut y = [[0.0; 3]; 4];
        for row in y.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.random_range(0.0..5.0);
            }
        }
        let cols: Vec<Vec<f64>> = (0..3).map(|j| y.iter().map(|r| r[j]).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        assert!((icc21(&refs).unwrap() - icc_oracle(&y)).abs() < 1e-10);
    }

    fn desc(i: usize) -> FeatureDescriptor {
        FeatureDescriptor::intensity(
            Region::WT,
            Channel::T1,
            FilterKind::Original,
            Family::FirstOrder,
            crate::descriptor::FIRST_ORDER_NAMES[i],
        )
    }

    /// Seven raters; rater 7 replaces the odd-indexed descriptors with
    /// independent noise, which pulls their OCCC far below tau.
    #[test]
    fn decorrelated_rater_excludes_exactly_that_half() {
        let mut rng = crate::seed::rng(6);
        let (n, p) = (60, 10);
        let truth: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random_range(0.0..100.0)).collect()).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let mut mats = Vec::new();
        for r in 0..7 {
            let mut vals = vec![0.0; n * p];
            for i in 0..n {
                for c in 0..p {
                    vals[i * p + c] = if r == 6 && c % 2 == 1 {
                        rng.random_range(0.0..100.0)
                    } else {
                        truth[c][i] + rng.random_range(-0.5..0.5)
                    };
                }
            }
            mats.push(FeatureMatrix::new((0..p).map(desc).collect(), ids.clone(), vals).unwrap());
        }
        let names = (1..=7).map(|r| format!("rater{r}")).collect();
        let report = stability_filter(&RaterStack::new(names, mats).unwrap(), 0.95).unwrap();
        let expect: Vec<FeatureDescriptor> = (0..p).step_by(2).map(desc).collect();
        assert_eq!(report.retained, expect);
        let back: StabilityReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back.retained, report.retained);
    }

    #[test]
    fn inclusive_threshold_and_exclusions() {
        let ids: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let ds = vec![desc(0), FeatureDescriptor::shape(Region::Brain, "MeshVolume"), desc(1)];
        let a = FeatureMatrix::new(ds.clone(), ids.clone(), vec![1., 5., 3., 2., 6., 3., 3., 7., 3., 4., 8., 3.]).unwrap();
        let stack = RaterStack::new(vec!["a".into(), "b".into()], vec![a.clone(), a]).unwrap();
        let report = stability_filter(&stack, 1.0).unwrap();
        // Identical raters give OCCC 1 >= 1; brain shape and the constant column are excluded up front.
        assert_eq!(report.retained, vec![desc(0)]);
        assert_eq!(report.augmented_pool(true).len(), 4);
        assert!(RaterStack::new(vec!["a".into()], vec![FeatureMatrix::new(ds, ids, vec![0.0; 12]).unwrap()]).is_err());
    }

    proptest! {
        #[test]
        fn occc_bounds_and_permutation(
            data in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 6), 3..6),
            shift in 0usize..6,
        ) {
            let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
            let o = occc(&refs).unwrap();
            prop_assume!(o.is_finite());
            let (_, lo, hi) = weighted_pairwise(&data);
            prop_assert!(o >= lo - 1e-12 && o <= hi + 1e-12);
            let mut rev = refs.clone();
            rev.reverse();
            prop_assert!((occc(&rev).unwrap() - o).abs() < 1e-12);
            let rotated: Vec<Vec<f64>> = data.iter().map(|r| {
                let mut r = r.clone();
                r.rotate_left(shift);
                r
            }).collect();
            let rrefs: Vec<&[f64]> = rotated.iter().map(Vec::as_slice).collect();
            prop_assert!((occc(&rrefs).unwrap() - o).abs() < 1e-12);
        }
    }
}
