//! Image channels (original, undecimated Haar sub-bands, LoG) and gray-level
//! discretization.

mod discretize;
mod log;
mod wavelet;

pub use discretize::{bin_values, discretize, DiscretizedGrid, Discretization};
pub use log::{gaussian_kernel, log_filter};
pub use wavelet::wavelet_subbands;

use crate::descriptor::FilterKind;
use crate::error::Result;
use crate::volume::VolumeGrid;

/// Index into a line of length `n` with half-sample symmetric reflection
/// (`x[-1] = x[0]`, `x[n] = x[n-1]`).
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Apply `f` to every 1D line of `values` along `axis`, writing into `out`.
pub(crate) fn for_each_line(
    dims: [usize; 3],
    axis: usize,
    values: &[f64],
    out: &mut [f64],
    mut f: impl FnMut(&[f64], &mut [f64]),
) {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let (a, b) = match axis {
        0 => (dims[1], dims[2]),
        1 => (dims[0], dims[2]),
        _ => (dims[0], dims[1]),
    };
    let mut line = vec![0.0; n];
    let mut res = vec![0.0; n];
    for j in 0..b {
        for i in 0..a {
            let start = match axis {
                0 => dims[0] * (i + dims[1] * j),
                1 => i + dims[0] * dims[1] * j,
                _ => i + dims[0] * j,
            };
            for (k, l) in line.iter_mut().enumerate() {
                *l = values[start + k * stride];
            }
            f(&line, &mut res);
            for (k, r) in res.iter().enumerate() {
                out[start + k * stride] = *r;
            }
        }
    }
}

/// All 11 default channels of one volume (or any other filter set), keyed by filter.
pub fn filter_bank(vol: &VolumeGrid, filters: &[FilterKind]) -> Result<Vec<(FilterKind, VolumeGrid)>> {
    let mut bands = None;
    let mut out = Vec::with_capacity(filters.len());
    for &f in filters {
        let img = match f {
            FilterKind::Original | FilterKind::None => vol.clone(),
            FilterKind::Wavelet(bits) => {
                let all = bands.get_or_insert_with(|| wavelet_subbands(vol));
                all.iter()
                    .find(|(b, _)| *b == bits)
                    .map(|(_, v)| v.clone())
                    .expect("all 8 bands computed")
            }
            FilterKind::Log { .. } => log_filter(vol, f.sigma_mm().expect("log sigma"))?,
        };
        out.push((f, img));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_reflects_half_sample() {
        assert_eq!(mirror(-1, 4), 0);
        assert_eq!(mirror(-2, 4), 1);
        assert_eq!(mirror(4, 4), 3);
        assert_eq!(mirror(5, 4), 2);
        assert_eq!(mirror(9, 4), 1);
        assert_eq!(mirror(2, 4), 2);
    }

    #[test]
    fn filter_bank_preserves_geometry() {
        let g = crate::volume::Geometry::new([5, 4, 3], [1.0, 1.5, 2.0]).unwrap();
        let vals = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let vol = VolumeGrid { geometry: g, values: vals };
        for (_, img) in filter_bank(&vol, &FilterKind::default_set()).unwrap() {
            assert_eq!(img.geometry, g);
        }
    }
}
