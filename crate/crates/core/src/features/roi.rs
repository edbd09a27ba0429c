//! Region-of-interest voxel list with a precomputed 26-neighbour table, shared
//! by every texture family and reused across all filtered images of a subject.

use crate::volume::{Geometry, RegionMask};

pub const NO_NEIGHBOR: u32 = u32::MAX;

/// The 13 unique 3D directions at distance 1; slot `d + 13` holds the opposite
/// of slot `d`.
pub const DIRECTIONS: [[i32; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [1, -1, -1],
];

#[derive(Debug, Clone)]
pub struct Roi {
    pub geometry: Geometry,
    /// Grid indices of the ROI voxels in ascending order.
    pub voxels: Vec<usize>,
    /// ROI-local index of each neighbour, or `NO_NEIGHBOR` when it is outside
    /// the grid or the ROI.
    pub neighbors: Vec<[u32; 26]>,
}

impl Roi {
    pub fn from_mask(mask: &RegionMask) -> Roi {
        Self::from_predicate(mask.geometry, |i| mask.voxels[i])
    }

    pub fn from_predicate(geometry: Geometry, inside: impl Fn(usize) -> bool) -> Roi {
        let voxels: Vec<usize> = (0..geometry.len()).filter(|&i| inside(i)).collect();
        let mut local = vec![NO_NEIGHBOR; geometry.len()];
        for (k, &i) in voxels.iter().enumerate() {
            local[i] = k as u32;
        }
        let dims = geometry.dims;
        let neighbors = voxels
            .iter()
            .map(|&i| {
                let c = geometry.coords(i);
                let mut nb = [NO_NEIGHBOR; 26];
                for (d, off) in DIRECTIONS.iter().enumerate() {
                    for (slot, sign) in [(d, 1i32), (d + 13, -1i32)] {
                        let mut ok = true;
                        let mut p = [0usize; 3];
                        for a in 0..3 {
                            let v = c[a] as i64 + (sign * off[a]) as i64;
                            if v < 0 || v >= dims[a] as i64 {
                                ok = false;
                                break;
                            }
                            p[a] = v as usize;
                        }
                        if ok {
                            nb[slot] = local[geometry.index(p[0], p[1], p[2])];
                        }
                    }
                }
                nb
            })
            .collect();
        Roi {
            geometry,
            voxels,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}
