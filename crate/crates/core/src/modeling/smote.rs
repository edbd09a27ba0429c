//! Synthetic minority oversampling by interpolation toward same-class nearest
//! neighbours.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Upsample every non-majority class to the majority count. Original rows come
/// first, synthetic rows are appended class by class. Balanced input is
/// returned unchanged.
pub fn smote(x: &[Vec<f64>], y: &[usize], k: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let members: Vec<Vec<usize>> = (0..n_classes)
        .map(|c| (0..y.len()).filter(|&i| y[i] == c).collect())
        .collect();
    let majority = members.iter().map(Vec::len).max().unwrap_or(0);
    let (mut xs, mut ys) = (x.to_vec(), y.to_vec());
    for (c, idx) in members.iter().enumerate() {
        if idx.is_empty() || idx.len() == majority {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::InvalidInput(format!("SMOTE: class {c} has a single sample")));
        }
        let k_eff = k.min(idx.len() - 1).max(1);
        let neighbours: Vec<Vec<usize>> = idx
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = idx
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (sq_dist(&x[i], &x[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                others.into_iter().take(k_eff).map(|(_, j)| j).collect()
            })
            .collect();
        let mut rng = seed::rng(seed::derive(seed, c as u64));
        for _ in 0..majority - idx.len() {
            let a = rng.random_range(0..idx.len());
            let nn = neighbours[a][rng.random_range(0..k_eff)];
            let u: f64 = rng.random();
            let base = &x[idx[a]];
            xs.push(base.iter().zip(&x[nn]).map(|(b, n)| b + u * (n - b)).collect());
            ys.push(c);
        }
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_is_unchanged() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![0, 1, 0, 1];
        assert_eq!(smote(&x, &y, 5, 1).unwrap(), (x, y));
    }

    #[test]
    fn two_point_minority_stays_on_segment() {
        let mut x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let mut y = vec![1, 1];
        for i in 0..8 {
            x.push(vec![5.0 + i as f64, -3.0]);
            y.push(0);
        }
        let (xs, ys) = smote(&x, &y, 5, 9).unwrap();
        assert_eq!(ys.iter().filter(|&&c| c == 1).count(), 8);
        for (p, &c) in xs.iter().zip(&ys).skip(10) {
            assert_eq!(c, 1);
            assert!((p[0] - p[1]).abs() < 1e-15 && (0.0..=1.0).contains(&p[0]));
        }
    }

    #[test]
    fn single_sample_class_errors() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(smote(&x, &[0, 0, 1], 5, 0).is_err());
    }
}
