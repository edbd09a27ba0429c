//! First-order intensity statistics over the ROI.

use crate::stats::{percentile_sorted, sorted};

/// The 17 first-order values in `FIRST_ORDER_NAMES` order. `values` are the raw
/// in-ROI intensities, `bins` their discretized levels (1-based).
pub fn first_order(values: &[f64], bins: &[u32], n_bins: u32) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return vec![f64::NAN; 17];
    }
    let s = sorted(values);
    let mean = values.iter().sum::<f64>() / n;
    let energy: f64 = values.iter().map(|v| v * v).sum();
    let (mut m2, mut m3, mut m4, mut mad) = (0.0, 0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        mad += d.abs();
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;
    let p10 = percentile_sorted(&s, 10.0);
    let p90 = percentile_sorted(&s, 90.0);
    let robust: Vec<f64> = values.iter().copied().filter(|&v| v >= p10 && v <= p90).collect();
    let rmad = if robust.is_empty() {
        f64::NAN
    } else {
        let rm = robust.iter().sum::<f64>() / robust.len() as f64;
        robust.iter().map(|v| (v - rm).abs()).sum::<f64>() / robust.len() as f64
    };

    let mut hist = vec![0.0; n_bins as usize + 1];
    for &b in bins {
        hist[b as usize] += 1.0;
    }
    let (mut entropy, mut uniformity) = (0.0, 0.0);
    for &h in &hist {
        if h > 0.0 {
            let p = h / n;
            entropy -= p * p.log2();
            uniformity += p * p;
        }
    }
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (f64::NAN, f64::NAN)
    };

    vec![
        energy,
        entropy,
        s[0],
        s[s.len() - 1],
        p10,
        p90,
        mean,
        percentile_sorted(&s, 50.0),
        percentile_sorted(&s, 75.0) - percentile_sorted(&s, 25.0),
        s[s.len() - 1] - s[0],
        mad,
        rmad,
        (energy / n).sqrt(),
        skew,
        kurt,
        m2,
        uniformity,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::FIRST_ORDER_NAMES;

    fn get(v: &[f64], name: &str) -> f64 {
        v[FIRST_ORDER_NAMES.iter().position(|n| *n == name).unwrap()]
    }

    #[test]
    fn single_voxel() {
        let v = first_order(&[2.0], &[1], 1);
        for name in ["Mean", "Median", "Minimum", "Maximum"] {
            assert_eq!(get(&v, name), 2.0);
        }
        assert_eq!(get(&v, "Variance"), 0.0);
        assert!(get(&v, "Skewness").is_nan());
        assert!(get(&v, "Kurtosis").is_nan());
    }

    #[test]
    fn two_values() {
        let v = first_order(&[0.0, 2.0], &[1, 2], 2);
        assert_eq!(get(&v, "Mean"), 1.0);
        assert_eq!(get(&v, "Range"), 2.0);
        assert!((get(&v, "RootMeanSquared") - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(get(&v, "Energy"), 4.0);
        assert_eq!(get(&v, "Entropy"), 1.0);
        assert_eq!(get(&v, "Uniformity"), 0.5);
    }

    #[test]
    fn constant_roi_histogram() {
        let v = first_order(&[3.0; 10], &[1; 10], 1);
        assert_eq!(get(&v, "Entropy"), 0.0);
        assert_eq!(get(&v, "Uniformity"), 1.0);
    }
}
