use crate::descriptor::WAVELET_ORDER;
use crate::volume::VolumeGrid;

use super::for_each_line;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Single-level undecimated separable Haar transform. Returns the 8 bands in
/// `WAVELET_ORDER` (LLL first), each with the input geometry. The high-pass tap
/// pairs `x[i]` with `x[i+1]`; the last sample mirrors onto itself.
pub fn wavelet_subbands(vol: &VolumeGrid) -> Vec<(u8, VolumeGrid)> {
    let dims = vol.geometry.dims;
    // stage[k] holds bands keyed by the bits decided so far.
    let mut stage: Vec<(u8, Vec<f64>)> = vec![(0, vol.values.clone())];
    for axis in 0..3 {
        let mut next = Vec::with_capacity(stage.len() * 2);
        for (bits, data) in &stage {
            let mut lo = vec![0.0; data.len()];
            let mut hi = vec![0.0; data.len()];
            for_each_line(dims, axis, data, &mut lo, |line, out| haar(line, out, 1.0));
            for_each_line(dims, axis, data, &mut hi, |line, out| haar(line, out, -1.0));
            next.push((*bits, lo));
            next.push((*bits | (1 << axis), hi));
        }
        stage = next;
    }
    WAVELET_ORDER
        .iter()
        .map(|&b| {
            let data = stage
                .iter()
                .find(|(bits, _)| *bits == b)
                .map(|(_, d)| d.clone())
                .expect("band present");
            (
                b,
                VolumeGrid {
                    geometry: vol.geometry,
                    values: data,
                },
            )
        })
        .collect()
}

fn haar(line: &[f64], out: &mut [f64], sign: f64) {
    let n = line.len();
    for i in 0..n {
        let next = if i + 1 < n { line[i + 1] } else { line[n - 1] };
        out[i] = (line[i] + sign * next) * INV_SQRT2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_volume() {
        let g = Geometry::new([5, 6, 7], [1.0; 3]).unwrap();
        let bands = wavelet_subbands(&VolumeGrid::filled(g, 2.0));
        for (bits, b) in bands {
            let expect = if bits == 0 { 2.0 * 2f64.powf(1.5) } else { 0.0 };
            assert!(b.values.iter().all(|v| (v - expect).abs() < 1e-9), "band {bits}");
        }
    }

    #[test]
    fn ramp_along_x_has_no_y_or_z_detail() {
        let g = Geometry::new([6, 5, 4], [1.0; 3]).unwrap();
        let values = (0..g.len()).map(|i| g.coords(i)[0] as f64 * 1.5).collect();
        let bands = wavelet_subbands(&VolumeGrid { geometry: g, values });
        for (bits, b) in bands {
            if bits & 0b110 != 0 {
                assert!(b.values.iter().all(|v| v.abs() < 1e-12), "band {bits}");
            }
        }
    }

    /// Naive triple-loop oracle applying the two-tap filters directly.
    #[test]
    fn matches_naive_filtering() {
        let n = 8;
        let g = Geometry::new([n, n, n], [1.0; 3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let vol = VolumeGrid {
            geometry: g,
            values: (0..g.len()).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect(),
        };
        let clamp = |i: usize| i.min(n - 1);
        let s = INV_SQRT2;
        for (bits, band) in wavelet_subbands(&vol) {
            for z in 0..n {
                for y in 0..n {
                    for x in 0..n {
                        let mut acc = 0.0;
                        for dz in 0..2 {
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let tap = |axis: usize, d: usize| -> f64 {
                                        if d == 1 && bits >> axis & 1 == 1 { -s } else { s }
                                    };
                                    let w = tap(0, dx) * tap(1, dy) * tap(2, dz);
                                    acc += w * vol.at(clamp(x + dx), clamp(y + dy), clamp(z + dz));
                                }
                            }
                        }
                        assert!((band.at(x, y, z) - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn energy_is_eight_times_input_for_compact_support() {
        // Zero border slab: every 2x2x2 window sum is inside the grid, so the
        // orthonormal pairwise identity sums to exactly 8x the input energy.
        let n = 10;
        let g = Geometry::new([n, n, n], [1.0; 3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..g.len())
            .map(|i| {
                let c = g.coords(i);
                if c.iter().all(|&v| (1..n - 1).contains(&v)) {
                    rng.random::<f64>() - 0.5
                } else {
                    0.0
                }
            })
            .collect();
        let e_in: f64 = values.iter().map(|v| v * v).sum();
        let vol = VolumeGrid { geometry: g, values };
        let e_out: f64 = wavelet_subbands(&vol)
            .iter()
            .flat_map(|(_, b)| b.values.iter().map(|v| v * v))
            .sum();
        assert!((e_out - 8.0 * e_in).abs() / (8.0 * e_in) < 1e-6);
    }
}
