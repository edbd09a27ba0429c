//! Texture matrices (GLCM, GLRLM, GLSZM, GLDM, NGTDM) and their features.
//!
//! All matrices use the 13 unique 3D directions at distance 1 or the full
//! 26-neighbourhood; neighbours outside the ROI never contribute. GLCM and
//! GLRLM matrices are summed over directions before features are computed.

use nalgebra::{DMatrix, SymmetricEigen};

use super::roi::{Roi, NO_NEIGHBOR};
use crate::descriptor::Family;

/// Features of one texture family for a discretized ROI.
pub fn texture_family(roi: &Roi, bins: &[u32], n_bins: u32, family: Family) -> Vec<f64> {
    match family {
        Family::Glcm => glcm_features(&glcm_matrix(roi, bins, n_bins), n_bins as usize),
        Family::Glrlm => {
            let (p, np) = glrlm_matrix(roi, bins, n_bins);
            size_matrix_features(&p, SizeFlavor::Run { n_voxels: np })
        }
        Family::Glszm => {
            let p = glszm_matrix(roi, bins, n_bins);
            size_matrix_features(&p, SizeFlavor::Zone { n_voxels: roi.len() })
        }
        Family::Gldm => size_matrix_features(&gldm_matrix(roi, bins, n_bins), SizeFlavor::Dependence),
        Family::Ngtdm => ngtdm_features(&ngtdm_vectors(roi, bins, n_bins)),
        Family::FirstOrder | Family::Shape | Family::Clinical => {
            panic!("{family:?} is not a texture family")
        }
    }
}

/// Symmetric co-occurrence counts merged over the 13 directions, row-major
/// `n_bins x n_bins` with level `i` at index `i - 1`.
pub fn glcm_matrix(roi: &Roi, bins: &[u32], n_bins: u32) -> Vec<f64> {
    let ng = n_bins as usize;
    let mut p = vec![0.0; ng * ng];
    for (k, nb) in roi.neighbors.iter().enumerate() {
        let a = bins[k] as usize - 1;
        for &m in &nb[..13] {
            if m != NO_NEIGHBOR {
                let b = bins[m as usize] as usize - 1;
                p[a * ng + b] += 1.0;
                p[b * ng + a] += 1.0;
            }
        }
    }
    p
}

fn entropy_of(p: impl Iterator<Item = f64>) -> f64 {
    p.filter(|&v| v > 0.0).map(|v| -v * v.log2()).sum()
}

pub fn glcm_features(counts: &[f64], ng: usize) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return vec![f64::NAN; 21];
    }
    let p: Vec<f64> = counts.iter().map(|c| c / total).collect();
    let lvl = |i: usize| (i + 1) as f64;
    let mut px = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            px[i] += p[i * ng + j];
        }
    }
    // Symmetric matrix: the column marginal equals the row marginal.
    let mu: f64 = (0..ng).map(|i| lvl(i) * px[i]).sum();
    let var: f64 = (0..ng).map(|i| (lvl(i) - mu).powi(2) * px[i]).sum();
    let mut psum = vec![0.0; 2 * ng + 1];
    let mut pdiff = vec![0.0; ng];
    let (mut autocorr, mut prom, mut shade, mut tend, mut contrast) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut energy, mut idmn, mut idn, mut maxp) = (0.0, 0.0, 0.0, 0.0f64);
    let (mut hxy, mut hxy1, mut hxy2) = (0.0, 0.0, 0.0);
    let ngf = ng as f64;
    for i in 0..ng {
        for j in 0..ng {
            let v = p[i * ng + j];
            let (li, lj) = (lvl(i), lvl(j));
            let pxy = px[i] * px[j];
            if pxy > 0.0 {
                hxy2 -= pxy * pxy.log2();
            }
            if v == 0.0 {
                continue;
            }
            psum[i + j + 2] += v;
            pdiff[i.abs_diff(j)] += v;
            autocorr += v * li * lj;
            let c = li + lj - 2.0 * mu;
            prom += c.powi(4) * v;
            shade += c.powi(3) * v;
            tend += c * c * v;
            let d = li - lj;
            contrast += d * d * v;
            energy += v * v;
            idmn += v / (1.0 + d * d / (ngf * ngf));
            idn += v / (1.0 + d.abs() / ngf);
            maxp = maxp.max(v);
            hxy -= v * v.log2();
            hxy1 -= v * pxy.log2();
        }
    }
    let correlation = if var > 0.0 { (autocorr - mu * mu) / var } else { f64::NAN };
    let diff_avg: f64 = pdiff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let diff_var: f64 = pdiff.iter().enumerate().map(|(k, v)| (k as f64 - diff_avg).powi(2) * v).sum();
    let inv_var: f64 = pdiff.iter().enumerate().skip(1).map(|(k, v)| v / (k * k) as f64).sum();
    let hx = entropy_of(px.iter().copied());
    let imc1 = if hx > 0.0 { (hxy - hxy1) / hx } else { f64::NAN };
    let imc2 = if hxy2 > 0.0 {
        (1.0 - (-2.0 * (hxy2 - hxy).max(0.0)).exp()).sqrt()
    } else {
        f64::NAN
    };
    let sum_squares = var;
    vec![
        autocorr,
        mu,
        prom,
        shade,
        tend,
        contrast,
        correlation,
        diff_avg,
        entropy_of(pdiff.iter().copied()),
        diff_var,
        energy,
        hxy,
        imc1,
        imc2,
        mcc(&p, &px, ng),
        idmn,
        idn,
        inv_var,
        maxp,
        entropy_of(psum.iter().copied()),
        sum_squares,
    ]
}

/// Maximal correlation coefficient: square root of the second largest
/// eigenvalue of `Q(i,j) = sum_k p(i,k) p(j,k) / (px(i) py(k))`, computed via the
/// similar symmetric matrix `M M^T` with `M = Dx^{-1/2} P Dy^{-1/2}`.
fn mcc(p: &[f64], px: &[f64], ng: usize) -> f64 {
    let occ: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    let n = occ.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = DMatrix::from_fn(n, n, |a, b| {
        let (i, j) = (occ[a], occ[b]);
        p[i * ng + j] / (px[i] * px[j]).sqrt()
    });
    let s = &m * m.transpose();
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev[1].max(0.0).sqrt()
}

/// Gray level x size style matrix, row-major `n_levels x max_size`, where
/// column `j` holds size `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeMatrix {
    pub n_levels: usize,
    pub max_size: usize,
    pub counts: Vec<f64>,
}

impl SizeMatrix {
    fn from_entries(n_levels: usize, entries: &[(u32, usize)]) -> SizeMatrix {
        let max_size = entries.iter().map(|e| e.1).max().unwrap_or(1);
        let mut counts = vec![0.0; n_levels * max_size];
        for &(g, s) in entries {
            counts[(g as usize - 1) * max_size + (s - 1)] += 1.0;
        }
        SizeMatrix {
            n_levels,
            max_size,
            counts,
        }
    }
}

/// Run-length counts merged over the 13 directions; also returns the voxel count.
pub fn glrlm_matrix(roi: &Roi, bins: &[u32], n_bins: u32) -> (SizeMatrix, usize) {
    let mut runs = Vec::new();
    for d in 0..13 {
        for k in 0..roi.len() {
            let back = roi.neighbors[k][d + 13];
            if back != NO_NEIGHBOR && bins[back as usize] == bins[k] {
                continue;
            }
            let mut len = 1;
            let mut cur = k;
            loop {
                let nx = roi.neighbors[cur][d];
                if nx == NO_NEIGHBOR || bins[nx as usize] != bins[k] {
                    break;
                }
                len += 1;
                cur = nx as usize;
            }
            runs.push((bins[k], len));
        }
    }
    (SizeMatrix::from_entries(n_bins as usize, &runs), roi.len())
}

/// Zone counts: 26-connected components of equal gray level.
pub fn glszm_matrix(roi: &Roi, bins: &[u32], n_bins: u32) -> SizeMatrix {
    let mut seen = vec![false; roi.len()];
    let mut zones = Vec::new();
    let mut stack = Vec::new();
    for start in 0..roi.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(k) = stack.pop() {
            size += 1;
            for &m in &roi.neighbors[k] {
                if m != NO_NEIGHBOR && !seen[m as usize] && bins[m as usize] == bins[start] {
                    seen[m as usize] = true;
                    stack.push(m as usize);
                }
            }
        }
        zones.push((bins[start], size));
    }
    SizeMatrix::from_entries(n_bins as usize, &zones)
}

/// Dependence counts with tolerance 0: size `1 + #equal in-ROI 26-neighbours`.
pub fn gldm_matrix(roi: &Roi, bins: &[u32], n_bins: u32) -> SizeMatrix {
    let deps: Vec<(u32, usize)> = roi
        .neighbors
        .iter()
        .enumerate()
        .map(|(k, nb)| {
            let same = nb
                .iter()
                .filter(|&&m| m != NO_NEIGHBOR && bins[m as usize] == bins[k])
                .count();
            (bins[k], same + 1)
        })
        .collect();
    SizeMatrix::from_entries(n_bins as usize, &deps)
}

#[derive(Debug, Clone, Copy)]
enum SizeFlavor {
    Run { n_voxels: usize },
    Zone { n_voxels: usize },
    Dependence,
}

/// Shared emphasis / non-uniformity / variance / entropy features. GLRLM and
/// GLSZM produce 14 values (with the percentage in slot 5), GLDM 13 (gray-level
/// non-uniformity left unnormalized, no percentage).
fn size_matrix_features(m: &SizeMatrix, flavor: SizeFlavor) -> Vec<f64> {
    let n_out = match flavor {
        SizeFlavor::Dependence => 13,
        _ => 14,
    };
    let total: f64 = m.counts.iter().sum();
    if total == 0.0 {
        return vec![f64::NAN; n_out];
    }
    let mut row = vec![0.0; m.n_levels];
    let mut col = vec![0.0; m.max_size];
    let (mut se, mut le, mut lg, mut hg, mut slg, mut shg, mut llg, mut lhg) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut mu_i, mut mu_j, mut ent) = (0.0, 0.0, 0.0);
    for gi in 0..m.n_levels {
        let i2 = ((gi + 1) * (gi + 1)) as f64;
        for sj in 0..m.max_size {
            let c = m.counts[gi * m.max_size + sj];
            if c == 0.0 {
                continue;
            }
            let j2 = ((sj + 1) * (sj + 1)) as f64;
            row[gi] += c;
            col[sj] += c;
            se += c / j2;
            le += c * j2;
            lg += c / i2;
            hg += c * i2;
            slg += c / (i2 * j2);
            shg += c * i2 / j2;
            llg += c * j2 / i2;
            lhg += c * i2 * j2;
            let p = c / total;
            mu_i += p * (gi + 1) as f64;
            mu_j += p * (sj + 1) as f64;
            ent -= p * p.log2();
        }
    }
    let (mut var_i, mut var_j) = (0.0, 0.0);
    for gi in 0..m.n_levels {
        for sj in 0..m.max_size {
            let c = m.counts[gi * m.max_size + sj];
            if c > 0.0 {
                let p = c / total;
                var_i += p * ((gi + 1) as f64 - mu_i).powi(2);
                var_j += p * ((sj + 1) as f64 - mu_j).powi(2);
            }
        }
    }
    let gln: f64 = row.iter().map(|r| r * r).sum::<f64>() / total;
    let snn: f64 = col.iter().map(|c| c * c).sum::<f64>() / (total * total);
    let mut out = vec![se / total, le / total];
    match flavor {
        SizeFlavor::Run { n_voxels } => {
            out.extend([gln / total, snn, total / (13.0 * n_voxels as f64)]);
        }
        SizeFlavor::Zone { n_voxels } => {
            out.extend([gln / total, snn, total / n_voxels as f64]);
        }
        SizeFlavor::Dependence => {
            out.extend([gln, snn]);
        }
    }
    out.extend([
        var_i,
        var_j,
        ent,
        lg / total,
        hg / total,
        slg / total,
        shg / total,
        llg / total,
        lhg / total,
    ]);
    out
}

/// NGTDM vectors indexed by level - 1: `(s_i, n_i)`. Voxels without any
/// in-ROI neighbour are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Ngtdm {
    pub s: Vec<f64>,
    pub n: Vec<f64>,
}

pub fn ngtdm_vectors(roi: &Roi, bins: &[u32], n_bins: u32) -> Ngtdm {
    let ng = n_bins as usize;
    let mut s = vec![0.0; ng];
    let mut n = vec![0.0; ng];
    for (k, nb) in roi.neighbors.iter().enumerate() {
        let (mut sum, mut cnt) = (0.0, 0usize);
        for &m in nb {
            if m != NO_NEIGHBOR {
                sum += bins[m as usize] as f64;
                cnt += 1;
            }
        }
        if cnt == 0 {
            continue;
        }
        let i = bins[k] as usize;
        s[i - 1] += (i as f64 - sum / cnt as f64).abs();
        n[i - 1] += 1.0;
    }
    Ngtdm { s, n }
}

pub fn ngtdm_features(v: &Ngtdm) -> Vec<f64> {
    let nvp: f64 = v.n.iter().sum();
    if nvp == 0.0 {
        return vec![f64::NAN; 5];
    }
    let occ: Vec<usize> = (0..v.n.len()).filter(|&i| v.n[i] > 0.0).collect();
    let p: Vec<f64> = v.n.iter().map(|c| c / nvp).collect();
    let lvl = |i: usize| (i + 1) as f64;
    let ps: f64 = occ.iter().map(|&i| p[i] * v.s[i]).sum();
    let s_total: f64 = v.s.iter().sum();
    let ngp = occ.len() as f64;

    let coarseness = if ps > 0.0 { 1.0 / ps } else { f64::NAN };
    let (mut pair_contrast, mut busy_den, mut complexity, mut strength_num) = (0.0, 0.0, 0.0, 0.0);
    for &i in &occ {
        for &j in &occ {
            let d = lvl(i) - lvl(j);
            pair_contrast += p[i] * p[j] * d * d;
            busy_den += (lvl(i) * p[i] - lvl(j) * p[j]).abs();
            complexity += d.abs() * (p[i] * v.s[i] + p[j] * v.s[j]) / (p[i] + p[j]);
            strength_num += (p[i] + p[j]) * d * d;
        }
    }
    let contrast = if ngp > 1.0 {
        pair_contrast / (ngp * (ngp - 1.0)) * s_total / nvp
    } else {
        f64::NAN
    };
    let busyness = if busy_den > 0.0 { ps / busy_den } else { f64::NAN };
    let strength = if s_total > 0.0 { strength_num / s_total } else { f64::NAN };
    vec![coarseness, contrast, busyness, complexity / nvp, strength]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{GLCM_NAMES, GLRLM_NAMES};
    use crate::volume::Geometry;

    fn roi_all(dims: [usize; 3]) -> Roi {
        Roi::from_predicate(Geometry::new(dims, [1.0; 3]).unwrap(), |_| true)
    }

    fn idx(names: &[&str], name: &str) -> usize {
        names.iter().position(|n| *n == name).unwrap()
    }

    #[test]
    fn constant_roi() {
        let roi = roi_all([3, 3, 3]);
        let bins = vec![1; 27];
        let g = texture_family(&roi, &bins, 1, Family::Glcm);
        assert_eq!(g[idx(GLCM_NAMES, "Contrast")], 0.0);
        assert_eq!(g[idx(GLCM_NAMES, "JointEntropy")], 0.0);
        assert!(g[idx(GLCM_NAMES, "Correlation")].is_nan());
        let r = texture_family(&roi, &bins, 1, Family::Glrlm);
        assert_eq!(r[idx(GLRLM_NAMES, "GrayLevelVariance")], 0.0);
    }

    #[test]
    fn two_voxel_cooccurrence() {
        let roi = roi_all([1, 1, 2]);
        let bins = vec![1, 2];
        let p = glcm_matrix(&roi, &bins, 2);
        let total: f64 = p.iter().sum();
        assert_eq!(p.iter().map(|v| v / total).collect::<Vec<_>>(), vec![0.0, 0.5, 0.5, 0.0]);
        let f = glcm_features(&p, 2);
        assert!((f[idx(GLCM_NAMES, "JointEntropy")] - 1.0).abs() < 1e-12);
        assert!((f[idx(GLCM_NAMES, "DifferenceAverage")] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn family_lengths() {
        let roi = roi_all([3, 2, 2]);
        let bins = vec![1, 2, 3, 1, 2, 3, 3, 3, 1, 2, 2, 1];
        for fam in Family::TEXTURE {
            assert_eq!(texture_family(&roi, &bins, 3, fam).len(), fam.names().len());
        }
    }
}
