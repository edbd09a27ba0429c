use crate::error::{Error, Result};
use crate::volume::VolumeGrid;

use super::{for_each_line, mirror};

/// Sampled 1D Gaussian truncated at 4 sigma, normalized to unit sum.
pub fn gaussian_kernel(sigma_mm: f64, spacing_mm: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_mm / spacing_mm).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| {
            let d = i as f64 * spacing_mm;
            (-d * d / (2.0 * sigma_mm * sigma_mm)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Scale-normalized Laplacian of Gaussian: `sigma^2 * laplacian(G_sigma * I)`.
///
/// The Gaussian is applied separably with mirror boundaries; the Laplacian is
/// the sum of second central differences scaled by `1 / spacing^2`.
pub fn log_filter(vol: &VolumeGrid, sigma_mm: f64) -> Result<VolumeGrid> {
    if !(sigma_mm > 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma_mm}")));
    }
    let dims = vol.geometry.dims;
    if dims.iter().any(|&d| d < 3) {
        return Err(Error::InvalidInput(format!(
            "LoG needs at least 3 voxels per axis, got {dims:?}"
        )));
    }
    let mut smooth = vol.values.clone();
    let mut tmp = vec![0.0; smooth.len()];
    for axis in 0..3 {
        let kernel = gaussian_kernel(sigma_mm, vol.geometry.spacing_mm[axis]);
        let r = (kernel.len() / 2) as isize;
        for_each_line(dims, axis, &smooth, &mut tmp, |line, out| {
            let n = line.len();
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    acc += w * line[mirror(i as isize + k as isize - r, n)];
                }
                *o = acc;
            }
        });
        std::mem::swap(&mut smooth, &mut tmp);
    }
    let mut lap = vec![0.0; smooth.len()];
    for axis in 0..3 {
        let h2 = vol.geometry.spacing_mm[axis].powi(2);
        for_each_line(dims, axis, &smooth, &mut tmp, |line, out| {
            let n = line.len();
            for (i, o) in out.iter_mut().enumerate() {
                let prev = line[mirror(i as isize - 1, n)];
                let next = line[mirror(i as isize + 1, n)];
                *o = (next - 2.0 * line[i] + prev) / h2;
            }
        });
        lap.iter_mut().zip(&tmp).for_each(|(l, t)| *l += t);
    }
    let s2 = sigma_mm * sigma_mm;
    lap.iter_mut().for_each(|v| *v *= s2);
    Ok(VolumeGrid {
        geometry: vol.geometry,
        values: lap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;
    use rand::{Rng, SeedableRng};

    fn random_volume(n: usize, seed: u64) -> VolumeGrid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Geometry::new([n, n, n], [1.0; 3]).unwrap();
        VolumeGrid {
            geometry: g,
            values: (0..g.len()).map(|_| rng.random::<f64>()).collect(),
        }
    }

    #[test]
    fn constant_volume_gives_zero() {
        let g = Geometry::new([9, 8, 7], [1.0, 1.2, 0.8]).unwrap();
        let out = log_filter(&VolumeGrid::filled(g, 3.5), 1.0).unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn linear_in_the_input() {
        let x = random_volume(16, 1);
        let y = random_volume(16, 2);
        let (a, b) = (2.5, -0.75);
        let combo = VolumeGrid {
            geometry: x.geometry,
            values: x.values.iter().zip(&y.values).map(|(p, q)| a * p + b * q).collect(),
        };
        let lx = log_filter(&x, 1.0).unwrap();
        let ly = log_filter(&y, 1.0).unwrap();
        let lc = log_filter(&combo, 1.0).unwrap();
        for i in 0..lc.values.len() {
            assert!((lc.values[i] - (a * lx.values[i] + b * ly.values[i])).abs() < 1e-6);
        }
    }

    /// Dense 3D convolution with the explicitly built kernel
    /// `sigma^2 * Laplacian_fd(G_x G_y G_z)`, evaluated at the impulse.
    #[test]
    fn impulse_matches_dense_kernel_oracle() {
        let n = 33;
        let c = n / 2;
        let g = Geometry::new([n, n, n], [1.0; 3]).unwrap();
        let mut vol = VolumeGrid::filled(g, 0.0);
        vol.values[g.index(c, c, c)] = 1.0;
        let sigma = 1.0;
        let out = log_filter(&vol, sigma).unwrap();

        let k1 = gaussian_kernel(sigma, 1.0);
        let r = (k1.len() / 2) as isize;
        let g3 = |x: isize, y: isize, z: isize| -> f64 {
            if x.abs() > r || y.abs() > r || z.abs() > r {
                return 0.0;
            }
            k1[(x + r) as usize] * k1[(y + r) as usize] * k1[(z + r) as usize]
        };
        // Dense kernel value at offset (x, y, z).
        let kernel = |x: isize, y: isize, z: isize| -> f64 {
            let mut v = -6.0 * g3(x, y, z);
            v += g3(x + 1, y, z) + g3(x - 1, y, z);
            v += g3(x, y + 1, z) + g3(x, y - 1, z);
            v += g3(x, y, z + 1) + g3(x, y, z - 1);
            sigma * sigma * v
        };
        // Direct convolution sum over the whole grid.
        let mut dense = 0.0;
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let v = vol.at(x, y, z);
                    if v != 0.0 {
                        dense += v * kernel(c as isize - x as isize, c as isize - y as isize, c as isize - z as isize);
                    }
                }
            }
        }
        assert!((out.at(c, c, c) - dense).abs() < 1e-6, "{} vs {}", out.at(c, c, c), dense);
        // Close to the continuous scale-normalized LoG peak -3 / (2 pi)^{3/2}.
        let analytic = -3.0 / (2.0 * std::f64::consts::PI).powf(1.5);
        assert!((out.at(c, c, c) - analytic).abs() / analytic.abs() < 0.25);
    }

    #[test]
    fn too_small_rejected() {
        let g = Geometry::new([2, 5, 5], [1.0; 3]).unwrap();
        assert!(log_filter(&VolumeGrid::filled(g, 0.0), 1.0).is_err());
    }
}
