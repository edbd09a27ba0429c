//! Quadratic-time ROC oracles.

fn psi(x: f64, y: f64) -> f64 {
    if x > y {
        1.0
    } else if x == y {
        0.5
    } else {
        0.0
    }
}

fn split(scores: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let pos = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    (pos, neg)
}

/// AUC by counting every positive/negative pair (ties count one half).
pub fn pair_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (pos, neg) = split(scores, labels);
    let mut wins = 0.0;
    for &x in &pos {
        for &y in &neg {
            wins += psi(x, y);
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Structural components: V10 over positives, V01 over negatives.
fn components(scores: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let (pos, neg) = split(scores, labels);
    let v10 = pos.iter().map(|&x| neg.iter().map(|&y| psi(x, y)).sum::<f64>() / neg.len() as f64).collect();
    let v01 = neg.iter().map(|&y| pos.iter().map(|&x| psi(x, y)).sum::<f64>() / pos.len() as f64).collect();
    (v10, v01)
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// (var_a, var_b, cov) of two correlated AUCs from the naive components.
pub fn delong_moments(a: &[f64], b: &[f64], labels: &[bool]) -> (f64, f64, f64) {
    let (a10, a01) = components(a, labels);
    let (b10, b01) = components(b, labels);
    let m = a10.len() as f64;
    let n = a01.len() as f64;
    let var = |x10: &[f64], y10: &[f64], x01: &[f64], y01: &[f64]| sample_cov(x10, y10) / m + sample_cov(x01, y01) / n;
    (
        var(&a10, &a10, &a01, &a01),
        var(&b10, &b10, &b01, &b01),
        var(&a10, &b10, &a01, &b01),
    )
}
