//! Discovery-set cleaning (outlier replacement, NaN imputation) and z-scoring,
//! with statistics fitted on discovery data only.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::descriptor::FeatureDescriptor;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::stats::median;

/// Consistency constant making the scaled MAD estimate sigma for normal data.
pub fn mad_scale() -> f64 {
    1.0 / (std::f64::consts::SQRT_2 * erfc_inv(1.5).abs())
}

/// Scaled median absolute deviation; NaNs are ignored.
pub fn scaled_mad(x: &[f64]) -> Result<f64> {
    let vals: Vec<f64> = x.iter().copied().filter(|v| !v.is_nan()).collect();
    if vals.is_empty() {
        return Err(Error::InvalidInput("scaled MAD of an all-NaN sequence".into()));
    }
    let med = median(&vals);
    let dev: Vec<f64> = vals.iter().map(|v| (v - med).abs()).collect();
    Ok(mad_scale() * median(&dev))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStat {
    pub descriptor: FeatureDescriptor,
    pub impute_mean: f64,
    pub z_mean: f64,
    pub z_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ColumnStats {
    pub columns: Vec<ColumnStat>,
}

impl ColumnStats {
    pub fn get(&self, d: &FeatureDescriptor) -> Option<&ColumnStat> {
        self.columns.iter().find(|c| &c.descriptor == d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::parse("column stats", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ColumnStats> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

fn z_value(v: f64, s: &ColumnStat) -> f64 {
    if s.z_std > 0.0 {
        (v - s.z_mean) / s.z_std
    } else {
        0.0
    }
}

/// Clean one discovery column; returns cleaned-and-z-scored values and its stats.
fn clean_column(descriptor: &FeatureDescriptor, col: &[f64]) -> (Vec<f64>, ColumnStat) {
    let finite: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    let impute_mean = if finite.is_empty() {
        0.0
    } else {
        let med = median(&finite);
        let limit = 3.0 * scaled_mad(&finite).expect("non-empty");
        let inliers: Vec<f64> = finite.iter().copied().filter(|v| (v - med).abs() <= limit).collect();
        let keep = if inliers.is_empty() { &finite } else { &inliers };
        keep.iter().sum::<f64>() / keep.len() as f64
    };
    let cleaned: Vec<f64> = if finite.is_empty() {
        vec![impute_mean; col.len()]
    } else {
        let med = median(&finite);
        let limit = 3.0 * scaled_mad(&finite).expect("non-empty");
        col.iter()
            .map(|&v| if v.is_nan() || (v - med).abs() > limit { impute_mean } else { v })
            .collect()
    };
    let n = cleaned.len() as f64;
    let z_mean = cleaned.iter().sum::<f64>() / n;
    let z_std = (cleaned.iter().map(|v| (v - z_mean).powi(2)).sum::<f64>() / n).sqrt();
    let stat = ColumnStat {
        descriptor: descriptor.clone(),
        impute_mean,
        z_mean,
        z_std,
    };
    let out = cleaned.iter().map(|&v| z_value(v, &stat)).collect();
    (out, stat)
}

/// Fit cleaning and z-score statistics on the discovery matrix and transform it.
pub fn fit_clean(discovery: &FeatureMatrix) -> (FeatureMatrix, ColumnStats) {
    let results: Vec<(Vec<f64>, ColumnStat)> = (0..discovery.n_cols())
        .into_par_iter()
        .map(|c| clean_column(&discovery.descriptors[c], &discovery.column(c)))
        .collect();
    let mut out = discovery.clone();
    let mut columns = Vec::with_capacity(results.len());
    for (c, (vals, stat)) in results.into_iter().enumerate() {
        for (r, v) in vals.into_iter().enumerate() {
            out.set(r, c, v);
        }
        columns.push(stat);
    }
    (out, ColumnStats { columns })
}

/// Impute and z-transform test data with discovery statistics only.
pub fn apply_clean(test: &FeatureMatrix, stats: &ColumnStats) -> Result<FeatureMatrix> {
    let index: HashMap<&FeatureDescriptor, &ColumnStat> = stats.columns.iter().map(|c| (&c.descriptor, c)).collect();
    let per_col = test
        .descriptors
        .iter()
        .map(|d| index.get(d).copied().ok_or_else(|| Error::Unfitted(d.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = test.clone();
    for r in 0..test.n_rows() {
        for (c, s) in per_col.iter().enumerate() {
            let v = test.get(r, c);
            out.set(r, c, z_value(if v.is_nan() { s.impute_mean } else { v }, s));
        }
    }
    Ok(out)
}

/// Descriptors whose scaled MAD is strictly positive.
pub fn mad_filter(matrix: &FeatureMatrix) -> Vec<FeatureDescriptor> {
    (0..matrix.n_cols())
        .into_par_iter()
        .filter(|&c| matches!(scaled_mad(&matrix.column(c)), Ok(m) if m > 0.0))
        .map(|c| matrix.descriptors[c].clone())
        .collect()
}
