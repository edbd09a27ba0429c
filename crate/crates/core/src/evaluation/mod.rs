//! Classification metrics (AUC, DeLong, RSD) and segmentation metrics and ranking.

mod auc;
mod ranking;
mod seg;

pub use auc::{delong_test, macro_ovr_auc, roc_auc, task_auc, DelongResult, RocResult};
pub use ranking::{frs_rank, perm_test, MetricCell, MetricTable, RankingTable, SegMetric};
pub use seg::{dsc, hd95};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

/// Relative standard deviation in percent (sample std over mean).
pub fn rsd(values: &[f64]) -> Result<f64> {
    let m = mean(values);
    if values.is_empty() || m == 0.0 || !m.is_finite() {
        return Err(Error::InvalidInput("RSD of a zero-mean sequence".into()));
    }
    if values.len() < 2 {
        return Ok(0.0);
    }
    Ok(100.0 * sample_std(values) / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rsd_examples() {
        let mrmr = [0.48, 0.57, 0.46, 0.56, 0.59, 0.59, 0.65, 0.53];
        let rfe = [0.42, 0.43, 0.41, 0.49, 0.52, 0.51, 0.54, 0.47];
        assert!((rsd(&mrmr).unwrap() - 11.2).abs() < 0.1);
        assert!((rsd(&rfe).unwrap() - 10.4).abs() < 0.1);
        assert_eq!(rsd(&[0.7; 5]).unwrap(), 0.0);
        assert!(rsd(&[1.0, -1.0]).is_err());
    }
}
