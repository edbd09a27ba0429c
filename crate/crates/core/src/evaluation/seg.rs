//! Segmentation overlap (Dice) and boundary distance (HD-95).

use crate::error::Result;
use crate::features::surface_voxels;
use crate::stats::percentile_sorted;
use crate::volume::RegionMask;

/// Dice similarity; both empty gives 1, exactly one empty gives 0.
pub fn dsc(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    a.geometry.check_same(&b.geometry)?;
    let (na, nb) = (a.count(), b.count());
    if na + nb == 0 {
        return Ok(1.0);
    }
    let inter = a.voxels.iter().zip(&b.voxels).filter(|(x, y)| **x && **y).count();
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

fn directed_d95(from: &[[f64; 3]], to: &[[f64; 3]]) -> f64 {
    let mut d: Vec<f64> = from
        .iter()
        .map(|p| {
            to.iter()
                .map(|q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    percentile_sorted(&d, 95.0)
}

fn boundary_points(m: &RegionMask) -> Vec<[f64; 3]> {
    let sp = m.geometry.spacing_mm;
    surface_voxels(m)
        .into_iter()
        .map(|c| [c[0] as f64 * sp[0], c[1] as f64 * sp[1], c[2] as f64 * sp[2]])
        .collect()
}

/// Symmetric 95th-percentile boundary distance in mm. Both empty gives 0; one
/// empty gives the physical image diagonal.
pub fn hd95(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    a.geometry.check_same(&b.geometry)?;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(a.geometry.diagonal_mm()),
        _ => {}
    }
    let (pa, pb) = (boundary_points(a), boundary_points(b));
    Ok(directed_d95(&pa, &pb).max(directed_d95(&pb, &pa)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn mask(dims: [usize; 3], f: impl Fn([usize; 3]) -> bool) -> RegionMask {
        let g = Geometry::new(dims, [1.0; 3]).unwrap();
        RegionMask::new(g, (0..g.len()).map(|i| f(g.coords(i))).collect()).unwrap()
    }

    #[test]
    fn identical_disjoint_and_shifted() {
        let a = mask([5, 5, 5], |c| c[0] < 3 && c[1] < 2);
        assert_eq!((dsc(&a, &a).unwrap(), hd95(&a, &a).unwrap()), (1.0, 0.0));
        let p = mask([12, 1, 1], |c| c[0] == 0);
        let q = mask([12, 1, 1], |c| c[0] == 10);
        assert_eq!((dsc(&p, &q).unwrap(), hd95(&p, &q).unwrap()), (0.0, 10.0));
        let cube = |s: usize| mask([24, 24, 24], move |c| (s + 2..s + 22).contains(&c[0]) && (2..22).contains(&c[1]) && (2..22).contains(&c[2]));
        let (a, b) = (cube(0), cube(1));
        assert!((dsc(&a, &b).unwrap() - 0.95).abs() < 1e-15);
        assert_eq!(hd95(&a, &b).unwrap(), 1.0);
        assert_eq!(dsc(&a, &b).unwrap(), dsc(&b, &a).unwrap());
    }

    #[test]
    fn empty_conventions() {
        let e = mask([3, 4, 12], |_| false);
        let f = mask([3, 4, 12], |c| c[2] == 1);
        assert_eq!(dsc(&e, &e).unwrap(), 1.0);
        assert_eq!(dsc(&e, &f).unwrap(), 0.0);
        assert_eq!(hd95(&e, &e).unwrap(), 0.0);
        assert_eq!(hd95(&e, &f).unwrap(), 13.0);
    }
}
