//! Mask-only 3D shape descriptors.

use nalgebra::{Matrix3, SymmetricEigen};

use super::mc_table::TRI_TABLE;
use crate::volume::{Geometry, RegionMask};

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs joined by each of the 12 cell edges.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Mesh volume (mm^3) and surface area (mm^2) of the iso-0.5 surface of the
/// zero-padded binary mask. Vertices sit at edge midpoints since the mask is
/// binary.
pub fn mesh_volume_area(mask: &RegionMask) -> (f64, f64) {
    let g = mask.geometry;
    let [nx, ny, nz] = g.dims;
    let Some((lo, hi)) = bounding_box(mask) else {
        return (0.0, 0.0);
    };
    let inside = |x: i64, y: i64, z: i64| -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < nx
            && (y as usize) < ny
            && (z as usize) < nz
            && mask.voxels[g.index(x as usize, y as usize, z as usize)]
    };
    let sp = g.spacing_mm;
    let (mut volume, mut area) = (0.0, 0.0);
    // Cells are anchored at voxel (x, y, z) - 1 so padding is implicit.
    for z in lo[2] as i64 - 1..=hi[2] as i64 {
        for y in lo[1] as i64 - 1..=hi[1] as i64 {
            for x in lo[0] as i64 - 1..=hi[0] as i64 {
                let mut case = 0usize;
                for (k, c) in CORNERS.iter().enumerate() {
                    if !inside(x + c[0] as i64, y + c[1] as i64, z + c[2] as i64) {
                        case |= 1 << k;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let vertex = |e: i8| -> [f64; 3] {
                    let [a, b] = EDGES[e as usize];
                    let (ca, cb) = (CORNERS[a], CORNERS[b]);
                    [
                        (x as f64 + (ca[0] + cb[0]) as f64 / 2.0) * sp[0],
                        (y as f64 + (ca[1] + cb[1]) as f64 / 2.0) * sp[1],
                        (z as f64 + (ca[2] + cb[2]) as f64 / 2.0) * sp[2],
                    ]
                };
                for tri in TRI_TABLE[case].chunks(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let (a, b, c) = (vertex(tri[0]), vertex(tri[1]), vertex(tri[2]));
                    volume += dot(a, cross(b, c)) / 6.0;
                    let n = cross(sub(b, a), sub(c, a));
                    area += dot(n, n).sqrt() / 2.0;
                }
            }
        }
    }
    (volume.abs(), area)
}

fn bounding_box(mask: &RegionMask) -> Option<([usize; 3], [usize; 3])> {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for (i, &v) in mask.voxels.iter().enumerate() {
        if v {
            any = true;
            let c = mask.geometry.coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
    }
    any.then_some((lo, hi))
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// In-mask voxels with at least one 6-neighbour outside the mask or grid.
pub fn surface_voxels(mask: &RegionMask) -> Vec<[usize; 3]> {
    let g: Geometry = mask.geometry;
    let d = g.dims;
    mask.indices()
        .into_iter()
        .map(|i| g.coords(i))
        .filter(|c| {
            (0..3).any(|a| {
                [-1i64, 1].iter().any(|&s| {
                    let v = c[a] as i64 + s;
                    if v < 0 || v >= d[a] as i64 {
                        return true;
                    }
                    let mut p = *c;
                    p[a] = v as usize;
                    !mask.voxels[g.index(p[0], p[1], p[2])]
                })
            })
        })
        .collect()
}

/// Maximum 3D diameter plus the slice (fixed z), column (fixed x) and row
/// (fixed y) 2D maxima over surface voxel centers.
fn diameters(mask: &RegionMask) -> [f64; 4] {
    let sp = mask.geometry.spacing_mm;
    let pts = surface_voxels(mask);
    let mut best = [0.0f64; 4];
    for (k, a) in pts.iter().enumerate() {
        for b in &pts[k + 1..] {
            let d = [
                (a[0] as f64 - b[0] as f64) * sp[0],
                (a[1] as f64 - b[1] as f64) * sp[1],
                (a[2] as f64 - b[2] as f64) * sp[2],
            ];
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            best[0] = best[0].max(d2);
            if a[2] == b[2] {
                best[1] = best[1].max(d2);
            }
            if a[0] == b[0] {
                best[2] = best[2].max(d2);
            }
            if a[1] == b[1] {
                best[3] = best[3].max(d2);
            }
        }
    }
    best.map(f64::sqrt)
}

/// Population covariance eigenvalues of the voxel-center coordinates, largest first.
fn principal_moments(mask: &RegionMask) -> [f64; 3] {
    let idx = mask.indices();
    let n = idx.len() as f64;
    let pts: Vec<[f64; 3]> = idx.iter().map(|&i| mask.geometry.position(i)).collect();
    let mut mean = [0.0; 3];
    for p in &pts {
        for a in 0..3 {
            mean[a] += p[a] / n;
        }
    }
    let mut cov = Matrix3::<f64>::zeros();
    for p in &pts {
        for a in 0..3 {
            for b in 0..3 {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]) / n;
            }
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|v: &f64| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    [ev[0], ev[1], ev[2]]
}

/// The 13 shape values in `SHAPE_NAMES` order; all NaN for an empty mask.
pub fn shape_features(mask: &RegionMask) -> Vec<f64> {
    if mask.is_empty() {
        return vec![f64::NAN; 13];
    }
    let (volume, area) = mesh_volume_area(mask);
    let sphericity = (36.0 * std::f64::consts::PI * volume * volume).cbrt() / area;
    let [d3, slice, column, row] = diameters(mask);
    let [l1, l2, l3] = principal_moments(mask);
    let ratio = |l: f64| if l1 > 0.0 { (l / l1).sqrt() } else { f64::NAN };
    vec![
        volume,
        area,
        area / volume,
        sphericity,
        d3,
        slice,
        column,
        row,
        4.0 * l1.sqrt(),
        4.0 * l2.sqrt(),
        4.0 * l3.sqrt(),
        ratio(l2),
        ratio(l3),
    ]
}

/// Mesh volume and surface area of a whole-brain mask.
pub fn brain_shape(mask: &RegionMask) -> Vec<f64> {
    if mask.is_empty() {
        return vec![f64::NAN; 2];
    }
    let (v, a) = mesh_volume_area(mask);
    vec![v, a]
}
