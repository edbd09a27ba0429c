//! Recursive feature elimination (step 1) driven by linear SVM weights.

use super::svm::train_linear_svm_gram;
use super::{check_labels, check_n, FeatureDiagnostic, SelectionResult, SelectorKind};
use crate::error::Result;
use crate::matrix::FeatureMatrix;

const SVM_C: f64 = 1.0;
const SVM_TOL: f64 = 1e-4;
/// Rebuild the Gram matrix from scratch this often to bound rounding drift.
const GRAM_REFRESH: usize = 128;

fn gram(cols: &[Vec<f64>], alive: &[bool], n: usize) -> Vec<f64> {
    let mut k = vec![0.0; n * n];
    for (c, _) in cols.iter().zip(alive).filter(|(_, &a)| a) {
        add_outer(&mut k, c, n, 1.0);
    }
    k
}

fn add_outer(k: &mut [f64], col: &[f64], n: usize, sign: f64) {
    for i in 0..n {
        let vi = sign * col[i];
        if vi != 0.0 {
            for j in 0..n {
                k[i * n + j] += vi * col[j];
            }
        }
    }
}

/// Eliminate one feature per round (smallest summed squared one-vs-rest
/// weight; ties drop the later column) until `n` remain. Binary tasks use a
/// single SVM with class 1 as the positive side.
pub fn rfe_svm(matrix: &FeatureMatrix, y: &[usize], n_classes: usize, n: usize) -> Result<SelectionResult> {
    check_labels(matrix.n_rows(), y)?;
    let p = matrix.n_cols();
    check_n(n, p)?;
    let rows = matrix.n_rows();
    let cols: Vec<Vec<f64>> = (0..p).map(|c| matrix.column(c)).collect();
    let targets: Vec<Vec<f64>> = if n_classes <= 2 {
        vec![y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect()]
    } else {
        (0..n_classes)
            .filter(|&c| y.contains(&c))
            .map(|c| y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect())
            .collect()
    };
    let mut alive = vec![true; p];
    let mut k = gram(&cols, &alive, rows);
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; targets.len()];
    let mut eliminated: Vec<Option<usize>> = vec![None; p];
    let mut importance = vec![0.0; p];
    let mut remaining = p;
    let mut round = 0;
    loop {
        importance.iter_mut().for_each(|v| *v = 0.0);
        for (t, target) in targets.iter().enumerate() {
            let sol = train_linear_svm_gram(&k, target, SVM_C, SVM_TOL, warm[t].as_deref())?;
            let coef: Vec<(usize, f64)> = sol
                .alpha
                .iter()
                .enumerate()
                .filter(|(_, &a)| a != 0.0)
                .map(|(i, &a)| (i, a * target[i]))
                .collect();
            for j in (0..p).filter(|&j| alive[j]) {
                let w: f64 = coef.iter().map(|&(i, cf)| cf * cols[j][i]).sum();
                importance[j] += w * w;
            }
            warm[t] = Some(sol.alpha);
        }
        if remaining == n {
            break;
        }
        let mut drop = usize::MAX;
        for j in (0..p).filter(|&j| alive[j]) {
            if drop == usize::MAX || importance[j] <= importance[drop] {
                drop = j;
            }
        }
        alive[drop] = false;
        eliminated[drop] = Some(round);
        remaining -= 1;
        round += 1;
        if round % GRAM_REFRESH == 0 {
            k = gram(&cols, &alive, rows);
        } else {
            add_outer(&mut k, &cols[drop], rows, -1.0);
        }
    }
    let survivors: Vec<usize> = (0..p).filter(|&j| alive[j]).collect();
    let mut diagnostics: Vec<FeatureDiagnostic> = survivors
        .iter()
        .map(|&j| FeatureDiagnostic {
            descriptor: matrix.descriptors[j].clone(),
            relevance: importance[j],
            eliminated_round: None,
        })
        .collect();
    let mut dropped: Vec<usize> = (0..p).filter(|&j| !alive[j]).collect();
    dropped.sort_by_key(|&j| eliminated[j]);
    diagnostics.extend(dropped.iter().map(|&j| FeatureDiagnostic {
        descriptor: matrix.descriptors[j].clone(),
        relevance: f64::NAN,
        eliminated_round: eliminated[j],
    }));
    Ok(SelectionResult {
        method: SelectorKind::RfeSvm,
        selected: survivors.iter().map(|&j| matrix.descriptors[j].clone()).collect(),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::mrmr::tests::matrix_of;
    use rand::Rng;

    fn perfect_plus_noise(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = crate::seed::rng(seed);
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let mut cols = vec![y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect::<Vec<f64>>()];
        for _ in 0..9 {
            cols.push((0..40).map(|_| rng.random_range(-1.5..1.5)).collect());
        }
        (cols, y)
    }

    #[test]
    fn perfect_feature_survives() {
        let wins = (0..40)
            .filter(|&s| {
                let (cols, y) = perfect_plus_noise(s);
                let m = matrix_of(&cols);
                rfe_svm(&m, &y, 2, 1).unwrap().selected == vec![m.descriptors[0].clone()]
            })
            .count();
        assert!(wins >= 38, "{wins}/40");
    }

    #[test]
    fn trace_and_identity() {
        let (cols, y) = perfect_plus_noise(3);
        let m = matrix_of(&cols);
        let all = rfe_svm(&m, &y, 2, 10).unwrap();
        assert_eq!(all.selected, m.descriptors);
        let r = rfe_svm(&m, &y, 2, 3).unwrap();
        let rounds: Vec<usize> = r.diagnostics.iter().filter_map(|d| d.eliminated_round).collect();
        assert_eq!(rounds, (0..7).collect::<Vec<_>>());
        let y3: Vec<usize> = (0..40).map(|i| i % 3).collect();
        assert_eq!(rfe_svm(&m, &y3, 3, 4).unwrap().selected.len(), 4);
    }

    #[test]
    fn invariant_to_column_order() {
        let (cols, y) = perfect_plus_noise(5);
        let m = matrix_of(&cols);
        let mut rev = cols.clone();
        rev.reverse();
        let mut mr = matrix_of(&rev);
        mr.descriptors.reverse();
        let mut a = rfe_svm(&m, &y, 2, 3).unwrap().selected;
        let mut b = rfe_svm(&mr, &y, 2, 3).unwrap().selected;
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
