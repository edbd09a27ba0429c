//! Tie-aware ROC AUC, macro one-vs-rest AUC and the fast DeLong test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::stats::midranks;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auc: f64,
    /// One-vs-rest AUC per class (multiclass only; NaN where a class is absent).
    pub per_class: Vec<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Set when some class had no positives or no negatives and was left out of the mean.
    pub degenerate_classes: bool,
}

/// Mann-Whitney AUC with midranks; `labels[i]` true marks a positive.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = midranks(scores);
    let r_pos: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let np = n_pos as f64;
    let auc = (r_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64);
    Ok(RocResult {
        auc,
        per_class: Vec::new(),
        n_pos,
        n_neg,
        degenerate_classes: false,
    })
}

/// Per-class one-vs-rest AUCs from a probability matrix and their unweighted mean.
pub fn macro_ovr_auc(probs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<RocResult> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: probs.len(),
            actual: labels.len(),
        });
    }
    let mut per_class = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        per_class.push(roc_auc(&scores, &pos).map_or(f64::NAN, |r| r.auc));
    }
    let valid: Vec<f64> = per_class.iter().copied().filter(|v| v.is_finite()).collect();
    if valid.is_empty() {
        return Err(Error::SingleClass);
    }
    Ok(RocResult {
        auc: valid.iter().sum::<f64>() / valid.len() as f64,
        degenerate_classes: valid.len() < n_classes,
        per_class,
        n_pos: labels.len(),
        n_neg: 0,
    })
}

/// Overall AUC for a task: the class-1 probability for binary tasks, macro
/// one-vs-rest otherwise.
pub fn task_auc(probs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<RocResult> {
    if n_classes == 2 {
        let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        roc_auc(&scores, &pos)
    } else {
        macro_ovr_auc(probs, labels, n_classes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
    pub z: f64,
    pub p: f64,
    /// Zero variance with unequal AUCs: the difference is exact and p is reported as 0.
    pub exact_difference: bool,
}

/// AUC and structural components (V10 over positives, V01 over negatives)
/// via midranks.
fn components(scores: &[f64], labels: &[bool]) -> (f64, Vec<f64>, Vec<f64>) {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let all = midranks(scores);
    let tx = midranks(&pos);
    let ty = midranks(&neg);
    let (mut ip, mut ineg) = (0, 0);
    let mut v10 = Vec::with_capacity(pos.len());
    let mut v01 = Vec::with_capacity(neg.len());
    for (r, &l) in all.iter().zip(labels) {
        if l {
            v10.push((r - tx[ip]) / n);
            ip += 1;
        } else {
            v01.push(1.0 - (r - ty[ineg]) / m);
            ineg += 1;
        }
    }
    let auc = v10.iter().sum::<f64>() / m;
    (auc, v10, v01)
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

/// Paired DeLong comparison of two score vectors on the same labeled samples.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DelongResult> {
    if scores_a.len() != labels.len() || scores_b.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: scores_a.len().min(scores_b.len()),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let (auc_a, x_a, y_a) = components(scores_a, labels);
    let (auc_b, x_b, y_b) = components(scores_b, labels);
    let (m, n) = (x_a.len() as f64, y_a.len() as f64);
    let var = |x: &[f64], y: &[f64]| -> f64 {
        let sx = if x.len() > 1 { sample_cov(x, x) / m } else { 0.0 };
        let sy = if y.len() > 1 { sample_cov(y, y) / n } else { 0.0 };
        sx + sy
    };
    let var_a = var(&x_a, &y_a);
    let var_b = var(&x_b, &y_b);
    let cov = (if x_a.len() > 1 { sample_cov(&x_a, &x_b) / m } else { 0.0 })
        + (if y_a.len() > 1 { sample_cov(&y_a, &y_b) / n } else { 0.0 });
    let v = var_a + var_b - 2.0 * cov;
    let diff = auc_a - auc_b;
    let (z, p, exact) = if v > 1e-300 {
        let z = diff / v.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (z, 2.0 * normal.cdf(-z.abs()), false)
    } else if diff == 0.0 {
        (0.0, 1.0, false)
    } else {
        (diff.signum() * f64::INFINITY, 0.0, true)
    };
    Ok(DelongResult {
        auc_a,
        auc_b,
        var_a,
        var_b,
        cov,
        z,
        p,
        exact_difference: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[1.0, 1.0], &[false, true]).unwrap().auc, 0.5);
        assert!(matches!(roc_auc(&[1.0, 2.0], &[true, true]), Err(Error::SingleClass)));
    }

    #[test]
    fn negation_symmetry_and_monotone_invariance() {
        let mut rng = crate::seed::rng(31);
        for _ in 0..50 {
            let s: Vec<f64> = (0..40).map(|_| (rng.random_range(0..10) as f64) / 3.0).collect();
            let mut l: Vec<bool> = (0..40).map(|_| rng.random_bool(0.4)).collect();
            l[0] = true;
            l[1] = false;
            let a = roc_auc(&s, &l).unwrap().auc;
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            assert_eq!(a + roc_auc(&neg, &l).unwrap().auc, 1.0);
            let cubed: Vec<f64> = s.iter().map(|v| v.powi(3) + 7.0).collect();
            assert_eq!(roc_auc(&cubed, &l).unwrap().auc, a);
        }
    }

    #[test]
    fn delong_identical_and_swap() {
        let mut rng = crate::seed::rng(32);
        let l: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let a: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let same = delong_test(&a, &a, &l).unwrap();
        assert_eq!((same.z, same.p), (0.0, 1.0));
        let ab = delong_test(&a, &b, &l).unwrap();
        let ba = delong_test(&b, &a, &l).unwrap();
        assert!((ab.z + ba.z).abs() < 1e-12 && (ab.p - ba.p).abs() < 1e-12);
    }

    #[test]
    fn macro_mean_flags_missing_class() {
        let probs = vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.7, 0.2, 0.1], vec![0.2, 0.7, 0.1]];
        let r = macro_ovr_auc(&probs, &[0, 1, 0, 1], 3).unwrap();
        assert!(r.degenerate_classes && r.per_class[2].is_nan());
        assert_eq!(r.auc, 1.0);
    }
}
