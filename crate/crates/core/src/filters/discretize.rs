use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, RegionMask, VolumeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Discretization {
    FixedBinCount(u32),
    FixedBinWidth(f64),
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization::FixedBinCount(32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedGrid {
    pub geometry: Geometry,
    /// 1..=n_bins inside the ROI, 0 outside.
    pub bins: Vec<u32>,
    pub n_bins: u32,
}

pub fn discretize(vol: &VolumeGrid, mask: &RegionMask, scheme: Discretization) -> Result<DiscretizedGrid> {
    vol.geometry.check_same(&mask.geometry)?;
    let roi: Vec<usize> = mask.indices();
    if roi.is_empty() {
        return Err(Error::EmptyMask);
    }
    let roi_values: Vec<f64> = roi.iter().map(|&i| vol.values[i]).collect();
    let (roi_bins, n_bins) = bin_values(&roi_values, scheme)?;
    let mut bins = vec![0u32; vol.values.len()];
    for (&i, &b) in roi.iter().zip(&roi_bins) {
        bins[i] = b;
    }
    Ok(DiscretizedGrid {
        geometry: vol.geometry,
        bins,
        n_bins,
    })
}

/// Bin a non-empty set of ROI intensities; returns per-value bins and the bin count.
pub fn bin_values(values: &[f64], scheme: Discretization) -> Result<(Vec<u32>, u32)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == lo {
        return Ok((vec![1; values.len()], 1));
    }
    match scheme {
        Discretization::FixedBinCount(nb) => {
            let nb = nb.max(1);
            let scale = nb as f64 / (hi - lo);
            let bins = values
                .iter()
                .map(|&v| (((v - lo) * scale).floor() as i64 + 1).clamp(1, nb as i64) as u32)
                .collect();
            Ok((bins, nb))
        }
        Discretization::FixedBinWidth(w) => {
            if !(w > 0.0) {
                return Err(Error::InvalidInput(format!("bin width must be positive, got {w}")));
            }
            let bins: Vec<u32> = values.iter().map(|&v| ((v - lo) / w).floor() as u32 + 1).collect();
            let max_bin = bins.iter().copied().max().unwrap_or(1);
            Ok((bins, max_bin))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(values: &[f64]) -> (VolumeGrid, RegionMask) {
        let g = Geometry::new([values.len(), 1, 1], [1.0; 3]).unwrap();
        (
            VolumeGrid { geometry: g, values: values.to_vec() },
            RegionMask { geometry: g, voxels: vec![true; values.len()] },
        )
    }

    #[test]
    fn two_point_case() {
        let (v, m) = line(&[0.0, 1.0]);
        let d = discretize(&v, &m, Discretization::FixedBinCount(2)).unwrap();
        assert_eq!(d.bins, vec![1, 2]);
    }

    #[test]
    fn constant_roi_single_bin() {
        let (v, m) = line(&[4.0, 4.0, 4.0]);
        let d = discretize(&v, &m, Discretization::FixedBinCount(32)).unwrap();
        assert_eq!(d.bins, vec![1, 1, 1]);
        assert_eq!(d.n_bins, 1);
    }

    #[test]
    fn three_point_case() {
        let (v, m) = line(&[0.0, 0.5, 1.0]);
        let d = discretize(&v, &m, Discretization::FixedBinCount(4)).unwrap();
        assert_eq!(d.bins, vec![1, 3, 4]);
    }

    #[test]
    fn fixed_width() {
        let (v, m) = line(&[10.0, 34.9, 35.0, 80.0]);
        let d = discretize(&v, &m, Discretization::FixedBinWidth(25.0)).unwrap();
        assert_eq!(d.bins, vec![1, 1, 2, 3]);
        assert_eq!(d.n_bins, 3);
    }

    #[test]
    fn outside_roi_is_zero_and_empty_mask_errors() {
        let (v, mut m) = line(&[1.0, 2.0, 3.0]);
        m.voxels[1] = false;
        let d = discretize(&v, &m, Discretization::default()).unwrap();
        assert_eq!(d.bins[1], 0);
        m.voxels = vec![false; 3];
        assert!(matches!(discretize(&v, &m, Discretization::default()), Err(Error::EmptyMask)));
    }

    proptest! {
        #[test]
        fn monotone(values in proptest::collection::vec(-1e3f64..1e3, 2..40), nb in 1u32..64) {
            let (v, m) = line(&values);
            let d = discretize(&v, &m, Discretization::FixedBinCount(nb)).unwrap();
            for i in 0..values.len() {
                prop_assert!(d.bins[i] >= 1 && d.bins[i] <= d.n_bins);
                for j in 0..values.len() {
                    if values[i] <= values[j] {
                        prop_assert!(d.bins[i] <= d.bins[j]);
                    }
                }
            }
        }
    }
}
