//! Linear soft-margin SVM trained by SMO on a precomputed Gram matrix
//! (second-order working-set selection).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;
const MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl LinearModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    /// Primal objective 1/2 |w|^2 + C * sum of hinge losses.
    pub fn objective(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let reg = 0.5 * self.weights.iter().map(|w| w * w).sum::<f64>();
        let hinge: f64 = x.iter().zip(y).map(|(r, &t)| (1.0 - t * self.decision(r)).max(0.0)).sum();
        reg + self.c * hinge
    }
}

/// Dual solution: multipliers and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Solve the dual for Gram matrix `k` (row-major n x n) and labels +-1,
/// optionally warm-started from feasible multipliers.
pub fn train_linear_svm_gram(k: &[f64], y: &[f64], c: f64, tol: f64, warm: Option<&[f64]>) -> Result<SvmSolution> {
    let n = y.len();
    if k.len() != n * n {
        return Err(Error::LengthMismatch {
            expected: n * n,
            actual: k.len(),
        });
    }
    if !(y.iter().any(|&t| t > 0.0) && y.iter().any(|&t| t < 0.0)) {
        return Err(Error::SingleClass);
    }
    let mut alpha = warm.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| q(i, j) * alpha[j]).sum::<f64>() - 1.0)
        .collect();
    let is_up = |a: f64, t: f64| (t > 0.0 && a < c) || (t < 0.0 && a > 0.0);
    let is_low = |a: f64, t: f64| (t < 0.0 && a < c) || (t > 0.0 && a > 0.0);
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i = t;
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i != usize::MAX && v < g_max {
                let b = g_max - v;
                let mut a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -b * b / a;
                if obj < best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < tol {
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        let mut quad = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    // Bias from free multipliers, else the midpoint of the feasible interval.
    let (mut sum, mut n_free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            n_free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if n_free > 0 { sum / n_free as f64 } else { (ub + lb) / 2.0 };
    Ok(SvmSolution {
        alpha,
        bias: -rho,
        iterations,
    })
}

/// Rows of `x` with labels +-1; returns the primal weights.
pub fn train_linear_svm(x: &[Vec<f64>], y: &[f64], c: f64) -> Result<LinearModel> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let sol = train_linear_svm_gram(&k, y, c, 1e-6, None)?;
    let p = x.first().map_or(0, Vec::len);
    let mut weights = vec![0.0; p];
    for (i, row) in x.iter().enumerate() {
        let coef = sol.alpha[i] * y[i];
        if coef != 0.0 {
            for (w, v) in weights.iter_mut().zip(row) {
                *w += coef * v;
            }
        }
    }
    Ok(LinearModel {
        weights,
        bias: sol.bias,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn separable_1d() {
        let x = vec![vec![-1.0], vec![1.0]];
        let m = train_linear_svm(&x, &[-1.0, 1.0], 1.0).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!((m.weights[0] - 1.0).abs() < 1e-9 && m.bias.abs() < 1e-9);
        assert!(train_linear_svm(&x, &[1.0, 1.0], 1.0).is_err());
    }

    fn noisy(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = crate::seed::rng(seed);
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = y
            .iter()
            .map(|&t| vec![t * 0.8 + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        (x, y)
    }

    #[test]
    fn informative_outweighs_noise() {
        let wins = (0..100)
            .filter(|&s| {
                let (x, y) = noisy(s, 60);
                let m = train_linear_svm(&x, &y, 1.0).unwrap();
                m.weights[0].abs() > m.weights[1].abs()
            })
            .count();
        assert!(wins >= 99, "{wins}");
    }

    #[test]
    fn mirror_symmetries() {
        let (x, y) = noisy(7, 40);
        let base = train_linear_svm(&x, &y, 1.0).unwrap();
        let neg_x: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let neg_y: Vec<f64> = y.iter().map(|t| -t).collect();
        let flipped_x = train_linear_svm(&neg_x, &y, 1.0).unwrap();
        let flipped_y = train_linear_svm(&x, &neg_y, 1.0).unwrap();
        for k in 0..2 {
            assert!((flipped_x.weights[k] + base.weights[k]).abs() < 1e-6);
            assert!((flipped_y.weights[k] + base.weights[k]).abs() < 1e-6);
        }
        assert!((flipped_y.bias + base.bias).abs() < 1e-6);
        let obj = base.objective(&x, &y);
        assert!((flipped_x.objective(&neg_x, &y) - obj).abs() < 1e-6);
        assert!((flipped_y.objective(&x, &neg_y) - obj).abs() < 1e-6);
    }

    /// Primal subgradient check: the SMO optimum is not beaten by small moves.
    #[test]
    fn optimum_is_local_minimum() {
        let (x, y) = noisy(8, 50);
        let m = train_linear_svm(&x, &y, 1.0).unwrap();
        let obj = m.objective(&x, &y);
        let mut rng = crate::seed::rng(9);
        for _ in 0..200 {
            let mut p = m.clone();
            for w in p.weights.iter_mut() {
                *w += rng.random_range(-1e-3..1e-3);
            }
            p.bias += rng.random_range(-1e-3..1e-3);
            assert!(p.objective(&x, &y) >= obj - 1e-4);
        }
    }
}
