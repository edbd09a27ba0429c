//! Univariate AUC: mean held-out AUC of a single-feature forest over repeated
//! stratified splits.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::task_auc;
use crate::modeling::{train_forest, ForestHyper};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UaucResult {
    pub mean: f64,
    pub std: f64,
}

fn stratified_split(y: &[usize], n_classes: usize, train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n_train = ((idx.len() as f64 * train_frac).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Mean and sample std of the held-out AUC over `iters` stratified splits.
pub fn uauc(
    feature: &[f64],
    y: &[usize],
    n_classes: usize,
    iters: usize,
    train_frac: f64,
    hyper: &ForestHyper,
    seed: u64,
) -> Result<UaucResult> {
    if feature.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: feature.len(),
            actual: y.len(),
        });
    }
    for c in 0..n_classes {
        let count = y.iter().filter(|&&l| l == c).count();
        if count == 1 {
            return Err(Error::InvalidInput(format!("class {c} has a single sample; cannot stratify")));
        }
    }
    if iters == 0 {
        return Ok(UaucResult {
            mean: f64::NAN,
            std: f64::NAN,
        });
    }
    let aucs = (0..iters as u64)
        .into_par_iter()
        .map(|it| {
            let s = seed::derive(seed, it);
            let (train, test) = stratified_split(y, n_classes, train_frac, seed::derive_named(s, "split"));
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| vec![feature[i]]).collect();
            let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let forest = train_forest(&xt, &yt, n_classes, hyper, seed::derive_named(s, "forest"))?;
            let probs: Vec<Vec<f64>> = test.iter().map(|&i| forest.predict_proba(&[feature[i]])).collect();
            let ye: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            Ok(task_auc(&probs, &ye, n_classes)?.auc)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let std = if aucs.len() > 1 {
        (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(UaucResult { mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn perfect_and_null_and_negation() {
        let y: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let perfect: Vec<f64> = y.iter().map(|&c| c as f64).collect();
        let h = ForestHyper { n_estimators: 50, ..Default::default() };
        assert!(uauc(&perfect, &y, 2, 20, 0.7, &h, 1).unwrap().mean >= 0.99);
        let mut rng = crate::seed::rng(51);
        let noise: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let m = uauc(&noise, &y, 2, 20, 0.7, &h, 2).unwrap().mean;
        assert!((0.4..=0.6).contains(&m), "{m}");
        let signal: Vec<f64> = y.iter().map(|&c| c as f64 * 0.5 + rng.random::<f64>()).collect();
        let neg: Vec<f64> = signal.iter().map(|v| -v).collect();
        let (a, b) = (uauc(&signal, &y, 2, 20, 0.7, &h, 3).unwrap(), uauc(&neg, &y, 2, 20, 0.7, &h, 3).unwrap());
        assert!((a.mean - b.mean).abs() <= 0.02, "{} vs {}", a.mean, b.mean);
    }

    #[test]
    fn split_is_stratified() {
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let (tr, te) = stratified_split(&y, 3, 0.7, 4);
        assert_eq!(tr.len() + te.len(), 30);
        for c in 0..3 {
            assert_eq!(tr.iter().filter(|&&i| y[i] == c).count(), 7);
        }
        assert!(uauc(&[1.0, 2.0, 3.0], &[0, 0, 1], 2, 5, 0.7, &ForestHyper::default(), 0).is_err());
    }
}
