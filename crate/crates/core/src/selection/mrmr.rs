//! One-way ANOVA F relevance and greedy MRMR selection.

use serde::{Deserialize, Serialize};

use super::{check_labels, check_n, FeatureDiagnostic, SelectionResult, SelectorKind};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::stats::pearson;

/// One-way ANOVA F. Infinite when the within-group mean square is 0 and the
/// between-group one positive; 0 when both are 0.
pub fn anova_f(x: &[f64], y: &[usize]) -> Result<f64> {
    check_labels(x.len(), y)?;
    let k = y.iter().max().unwrap() + 1;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&v, &c) in x.iter().zip(y) {
        sums[c] += v;
        counts[c] += 1;
    }
    let groups: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    let n = x.len() as f64;
    let g = groups.len() as f64;
    if g < 2.0 {
        return Err(Error::SingleClass);
    }
    let grand = x.iter().sum::<f64>() / n;
    let means: Vec<f64> = (0..k)
        .map(|c| if counts[c] > 0 { sums[c] / counts[c] as f64 } else { 0.0 })
        .collect();
    let ss_between: f64 = groups
        .iter()
        .map(|&c| counts[c] as f64 * (means[c] - grand).powi(2))
        .sum();
    let ss_within: f64 = x.iter().zip(y).map(|(v, &c)| (v - means[c]).powi(2)).sum();
    let ms_between = ss_between / (g - 1.0);
    let ms_within = if n > g { ss_within / (n - g) } else { 0.0 };
    Ok(if ms_within > 0.0 {
        ms_between / ms_within
    } else if ms_between > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MrmrScheme {
    #[default]
    Quotient,
    Difference,
}

const REDUNDANCY_FLOOR: f64 = 1e-12;

/// Greedy MRMR: first the max-F feature, then repeatedly the candidate
/// maximizing F against its mean absolute Pearson correlation with the
/// selected set. Ties go to the earlier column.
pub fn mrmr(matrix: &FeatureMatrix, y: &[usize], n: usize, scheme: MrmrScheme) -> Result<SelectionResult> {
    check_labels(matrix.n_rows(), y)?;
    let p = matrix.n_cols();
    check_n(n, p)?;
    let cols: Vec<Vec<f64>> = (0..p).map(|c| matrix.column(c)).collect();
    if cols.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("MRMR requires a finite matrix".into()));
    }
    let relevance = cols.iter().map(|c| anova_f(c, y)).collect::<Result<Vec<_>>>()?;
    let mut redundancy_sum = vec![0.0; p];
    let mut chosen = vec![false; p];
    let mut order = Vec::with_capacity(n);
    for step in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|&j| !chosen[j]) {
            let score = if step == 0 {
                relevance[j]
            } else {
                let red = redundancy_sum[j] / step as f64;
                match scheme {
                    MrmrScheme::Quotient => relevance[j] / red.max(REDUNDANCY_FLOOR),
                    MrmrScheme::Difference => relevance[j] - red,
                }
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (pick, _) = best.expect("candidates remain");
        chosen[pick] = true;
        order.push(pick);
        for j in (0..p).filter(|&j| !chosen[j]) {
            let r = pearson(&cols[j], &cols[pick]);
            redundancy_sum[j] += if r.is_nan() { 0.0 } else { r.abs() };
        }
    }
    Ok(SelectionResult {
        method: SelectorKind::Mrmr,
        selected: order.iter().map(|&j| matrix.descriptors[j].clone()).collect(),
        diagnostics: order
            .iter()
            .map(|&j| FeatureDiagnostic {
                descriptor: matrix.descriptors[j].clone(),
                relevance: relevance[j],
                eliminated_round: None,
            })
            .collect(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::descriptor::{FeatureDescriptor, Region, SHAPE_NAMES};
    use rand::Rng;

    #[test]
    fn anova_examples() {
        assert!((anova_f(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 0, 1, 1, 1]).unwrap() - 13.5).abs() < 1e-12);
        assert_eq!(anova_f(&[0.0, 0.0, 1.0, 1.0], &[0, 0, 1, 1]).unwrap(), f64::INFINITY);
        assert_eq!(anova_f(&[1.0, 3.0, 1.0, 3.0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(anova_f(&[1.0, 2.0], &[1, 1]).is_err());
    }

    pub(crate) fn matrix_of(cols: &[Vec<f64>]) -> FeatureMatrix {
        let n = cols[0].len();
        let descs = (0..cols.len()).map(|j| FeatureDescriptor::shape(Region::WT, SHAPE_NAMES[j])).collect();
        let vals = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
        FeatureMatrix::new(descs, (0..n).map(|i| format!("s{i}")).collect(), vals).unwrap()
    }

    #[test]
    fn copy_loses_to_weaker_uncorrelated() {
        let mut rng = crate::seed::rng(41);
        let y: Vec<usize> = (0..60).map(|i| i % 2).collect();
        let a: Vec<f64> = y.iter().map(|&c| c as f64 * 2.0 + rng.random_range(-1.0..1.0)).collect();
        let b = a.clone();
        let raw: Vec<f64> = y.iter().map(|&c| c as f64 * 0.8 + rng.random_range(-1.0..1.0)).collect();
        // Remove the component along centred A so C is exactly uncorrelated with it.
        let ma = a.iter().sum::<f64>() / 60.0;
        let ac: Vec<f64> = a.iter().map(|v| v - ma).collect();
        let proj = raw.iter().zip(&ac).map(|(r, x)| r * x).sum::<f64>() / ac.iter().map(|x| x * x).sum::<f64>();
        let c: Vec<f64> = raw.iter().zip(&ac).map(|(r, x)| r - proj * x).collect();
        assert!(pearson(&c, &a).abs() < 1e-12 && anova_f(&c, &y).unwrap() > 0.0);
        let m = matrix_of(&[a, b, c]);
        let res = mrmr(&m, &y, 3, MrmrScheme::Quotient).unwrap();
        assert_eq!(res.selected[0], m.descriptors[0]);
        assert_eq!(res.selected[1], m.descriptors[2]);
        assert_eq!(res.selected[2], m.descriptors[1]);
        let one = mrmr(&m, &y, 1, MrmrScheme::Quotient).unwrap();
        assert_eq!(one.selected, vec![m.descriptors[0].clone()]);
        assert!(mrmr(&m, &y, 4, MrmrScheme::Quotient).is_err());
    }

    /// Brute-force the quotient criterion for the second pick.
    #[test]
    fn second_pick_matches_brute_force() {
        let mut rng = crate::seed::rng(42);
        for _ in 0..20 {
            let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
            let cols: Vec<Vec<f64>> = (0..6)
                .map(|j| y.iter().map(|&c| (c as f64) * (j as f64 * 0.2) + rng.random_range(-1.0..1.0)).collect())
                .collect();
            let m = matrix_of(&cols);
            let res = mrmr(&m, &y, 2, MrmrScheme::Quotient).unwrap();
            let f: Vec<f64> = cols.iter().map(|c| anova_f(c, &y).unwrap()).collect();
            let first = (0..6).fold(0, |b, j| if f[j] > f[b] { j } else { b });
            let score = |j: usize| f[j] / pearson(&cols[j], &cols[first]).abs();
            let second = (0..6).filter(|&j| j != first).fold(usize::MAX, |b, j| {
                if b == usize::MAX || score(j) > score(b) {
                    j
                } else {
                    b
                }
            });
            assert_eq!(res.selected[0], m.descriptors[first]);
            assert_eq!(res.selected[1], m.descriptors[second]);
        }
    }
}
