//! Direct-formula agreement statistics.

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn pop_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

fn pop_cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64
}

/// Lin's CCC written out term by term.
pub fn ccc(x: &[f64], y: &[f64]) -> f64 {
    let d = mean(x) - mean(y);
    2.0 * pop_cov(x, y) / (pop_var(x) + pop_var(y) + d * d)
}

/// Overall CCC as the weighted average of pairwise CCCs, weights being the
/// pairwise CCC denominators.
pub fn occc(raters: &[Vec<f64>]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..raters.len() {
        for k in j + 1..raters.len() {
            let d = mean(&raters[j]) - mean(&raters[k]);
            let w = pop_var(&raters[j]) + pop_var(&raters[k]) + d * d;
            num += w * ccc(&raters[j], &raters[k]);
            den += w;
        }
    }
    num / den
}

/// Pairwise CCC range over all rater pairs.
pub fn pairwise_range(raters: &[Vec<f64>]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..raters.len() {
        for k in j + 1..raters.len() {
            let c = ccc(&raters[j], &raters[k]);
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    (lo, hi)
}

/// ICC(2,1) from the two-way ANOVA mean squares; `raters[j][i]` is rater j on subject i.
pub fn icc21(raters: &[Vec<f64>]) -> f64 {
    let k = raters.len();
    let n = raters[0].len();
    let grand = raters.iter().flatten().sum::<f64>() / (n * k) as f64;
    let subj: Vec<f64> = (0..n).map(|i| raters.iter().map(|r| r[i]).sum::<f64>() / k as f64).collect();
    let rat: Vec<f64> = raters.iter().map(|r| mean(r)).collect();
    let ss_rows: f64 = subj.iter().map(|m| (m - grand).powi(2)).sum::<f64>() * k as f64;
    let ss_cols: f64 = rat.iter().map(|m| (m - grand).powi(2)).sum::<f64>() * n as f64;
    let ss_total: f64 = raters.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_err = ss_total - ss_rows - ss_cols;
    let msr = ss_rows / (n - 1) as f64;
    let msc = ss_cols / (k - 1) as f64;
    let mse = ss_err / ((n - 1) * (k - 1)) as f64;
    (msr - mse) / (msr + (k as f64 - 1.0) * mse + k as f64 * (msc - mse) / n as f64)
}
