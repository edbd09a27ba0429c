//! Naive coordinate-loop re-implementations of the texture families.

use rand::Rng;
use radstack::descriptor::Family;
use radstack::features::texture_features;
use radstack::filters::DiscretizedGrid;
use radstack::volume::Geometry;

pub struct Grid {
    pub dims: [usize; 3],
    pub bins: Vec<u32>,
    pub ng: usize,
}

impl Grid {
    fn at(&self, p: [i64; 3]) -> u32 {
        for a in 0..3 {
            if p[a] < 0 || p[a] >= self.dims[a] as i64 {
                return 0;
            }
        }
        self.bins[p[0] as usize + self.dims[0] * (p[1] as usize + self.dims[1] * p[2] as usize)]
    }

    fn points(&self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for z in 0..self.dims[2] as i64 {
            for y in 0..self.dims[1] as i64 {
                for x in 0..self.dims[0] as i64 {
                    if self.at([x, y, z]) > 0 {
                        out.push([x, y, z]);
                    }
                }
            }
        }
        out
    }
}

fn add(p: [i64; 3], d: [i64; 3], k: i64) -> [i64; 3] {
    [p[0] + k * d[0], p[1] + k * d[1], p[2] + k * d[2]]
}

/// All 26 offsets; the 13 "forward" ones are those whose first nonzero
/// component is positive.
fn offsets() -> (Vec<[i64; 3]>, Vec<[i64; 3]>) {
    let mut all = Vec::new();
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    all.push([dx, dy, dz]);
                }
            }
        }
    }
    let forward = all
        .iter()
        .copied()
        .filter(|d| d.iter().find(|&&c| c != 0).copied().unwrap() > 0)
        .collect();
    (all, forward)
}

fn ent(ps: &[f64]) -> f64 {
    ps.iter().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

pub fn glcm_oracle(g: &Grid) -> Vec<f64> {
    let ng = g.ng;
    let (_, fwd) = offsets();
    let mut c = vec![vec![0.0; ng]; ng];
    for p in g.points() {
        for d in &fwd {
            let q = g.at(add(p, *d, 1));
            if q > 0 {
                let a = g.at(p) as usize - 1;
                let b = q as usize - 1;
                c[a][b] += 1.0;
                c[b][a] += 1.0;
            }
        }
    }
    let total: f64 = c.iter().flatten().sum();
    let p: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|v| v / total).collect()).collect();
    let px: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..ng).map(|j| (0..ng).map(|i| p[i][j]).sum()).collect();
    let l = |i: usize| (i + 1) as f64;
    let mux: f64 = (0..ng).map(|i| l(i) * px[i]).sum();
    let muy: f64 = (0..ng).map(|j| l(j) * py[j]).sum();
    let sx = (0..ng).map(|i| (l(i) - mux).powi(2) * px[i]).sum::<f64>().sqrt();
    let sy = (0..ng).map(|j| (l(j) - muy).powi(2) * py[j]).sum::<f64>().sqrt();
    let sum_over = |f: &dyn Fn(usize, usize, f64) -> f64| -> f64 {
        let mut s = 0.0;
        for i in 0..ng {
            for j in 0..ng {
                s += f(i, j, p[i][j]);
            }
        }
        s
    };
    let mut pplus = vec![0.0; 2 * ng + 1];
    let mut pminus = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            pplus[i + j + 2] += p[i][j];
            pminus[i.abs_diff(j)] += p[i][j];
        }
    }
    let da: f64 = (0..ng).map(|k| k as f64 * pminus[k]).sum();
    let hxy = sum_over(&|_, _, v| if v > 0.0 { -v * v.log2() } else { 0.0 });
    let hxy1 = sum_over(&|i, j, v| if v > 0.0 { -v * (px[i] * py[j]).log2() } else { 0.0 });
    let hxy2 = sum_over(&|i, j, _| {
        let q = px[i] * py[j];
        if q > 0.0 {
            -q * q.log2()
        } else {
            0.0
        }
    });
    let hx = ent(&px);
    let hy = ent(&py);
    let ngf = ng as f64;
    // MCC via the non-symmetric Q matrix restricted to occupied levels.
    let occ: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    let mcc = if occ.len() < 2 {
        f64::NAN
    } else {
        let n = occ.len();
        let q = nalgebra::DMatrix::from_fn(n, n, |a, b| {
            let (i, j) = (occ[a], occ[b]);
            (0..ng).filter(|&k| py[k] > 0.0).map(|k| p[i][k] * p[j][k] / (px[i] * py[k])).sum::<f64>()
        });
        let mut ev: Vec<f64> = q.complex_eigenvalues().iter().map(|c| c.re).collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev[1].max(0.0).sqrt()
    };
    vec![
        sum_over(&|i, j, v| l(i) * l(j) * v),
        mux,
        sum_over(&|i, j, v| (l(i) + l(j) - mux - muy).powi(4) * v),
        sum_over(&|i, j, v| (l(i) + l(j) - mux - muy).powi(3) * v),
        sum_over(&|i, j, v| (l(i) + l(j) - mux - muy).powi(2) * v),
        sum_over(&|i, j, v| (l(i) - l(j)).powi(2) * v),
        if sx * sy > 0.0 {
            (sum_over(&|i, j, v| l(i) * l(j) * v) - mux * muy) / (sx * sy)
        } else {
            f64::NAN
        },
        da,
        ent(&pminus),
        (0..ng).map(|k| (k as f64 - da).powi(2) * pminus[k]).sum(),
        sum_over(&|_, _, v| v * v),
        hxy,
        if hx.max(hy) > 0.0 { (hxy - hxy1) / hx.max(hy) } else { f64::NAN },
        if hxy2 > 0.0 { (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt() } else { f64::NAN },
        mcc,
        sum_over(&|i, j, v| v / (1.0 + (l(i) - l(j)).powi(2) / (ngf * ngf))),
        sum_over(&|i, j, v| v / (1.0 + (l(i) - l(j)).abs() / ngf)),
        (1..ng).map(|k| pminus[k] / (k * k) as f64).sum(),
        p.iter().flatten().cloned().fold(0.0, f64::max),
        ent(&pplus),
        (0..ng).map(|i| (l(i) - mux).powi(2) * px[i]).sum(),
    ]
}

/// (gray level, size) entries shared by GLRLM / GLSZM / GLDM.
fn size_features(entries: &[(u32, usize)], ng: usize, tail: &[f64], gln_normalized: bool) -> Vec<f64> {
    let ns = entries.iter().map(|e| e.1).max().unwrap();
    let mut m = vec![vec![0.0; ns]; ng];
    for &(g, s) in entries {
        m[g as usize - 1][s - 1] += 1.0;
    }
    let nz: f64 = entries.len() as f64;
    let f = |w: &dyn Fn(f64, f64) -> f64| -> f64 {
        let mut s = 0.0;
        for i in 0..ng {
            for j in 0..ns {
                s += m[i][j] * w((i + 1) as f64, (j + 1) as f64);
            }
        }
        s / nz
    };
    let mu_i = f(&|i, _| i);
    let mu_j = f(&|_, j| j);
    let gln = (0..ng).map(|i| m[i].iter().sum::<f64>().powi(2)).sum::<f64>() / nz;
    let snn = (0..ns).map(|j| (0..ng).map(|i| m[i][j]).sum::<f64>().powi(2)).sum::<f64>() / (nz * nz);
    let probs: Vec<f64> = m.iter().flatten().map(|v| v / nz).collect();
    let mut out = vec![f(&|_, j| 1.0 / (j * j)), f(&|_, j| j * j)];
    out.push(if gln_normalized { gln / nz } else { gln });
    out.push(snn);
    out.extend_from_slice(tail);
    out.extend([
        f(&|i, _| (i - mu_i).powi(2)),
        f(&|_, j| (j - mu_j).powi(2)),
        ent(&probs),
        f(&|i, _| 1.0 / (i * i)),
        f(&|i, _| i * i),
        f(&|i, j| 1.0 / (i * i * j * j)),
        f(&|i, j| i * i / (j * j)),
        f(&|i, j| j * j / (i * i)),
        f(&|i, j| i * i * j * j),
    ]);
    out
}

pub fn glrlm_oracle(g: &Grid) -> Vec<f64> {
    let (_, fwd) = offsets();
    let pts = g.points();
    let mut runs = Vec::new();
    for d in &fwd {
        for &p in &pts {
            let v = g.at(p);
            if g.at(add(p, *d, -1)) == v {
                continue;
            }
            let mut k = 1;
            while g.at(add(p, *d, k)) == v {
                k += 1;
            }
            runs.push((v, k as usize));
        }
    }
    let pct = runs.len() as f64 / (13.0 * pts.len() as f64);
    size_features(&runs, g.ng, &[pct], true)
}

pub fn glszm_oracle(g: &Grid) -> Vec<f64> {
    let (all, _) = offsets();
    let pts = g.points();
    let mut label: std::collections::HashMap<[i64; 3], usize> = Default::default();
    let mut zones = Vec::new();
    for &p in &pts {
        if label.contains_key(&p) {
            continue;
        }
        let id = zones.len();
        let v = g.at(p);
        let mut queue = std::collections::VecDeque::from([p]);
        label.insert(p, id);
        let mut size = 0;
        while let Some(q) = queue.pop_front() {
            size += 1;
            for d in &all {
                let r = add(q, *d, 1);
                if g.at(r) == v && !label.contains_key(&r) {
                    label.insert(r, id);
                    queue.push_back(r);
                }
            }
        }
        zones.push((v, size));
    }
    let pct = zones.len() as f64 / pts.len() as f64;
    size_features(&zones, g.ng, &[pct], true)
}

pub fn gldm_oracle(g: &Grid) -> Vec<f64> {
    let (all, _) = offsets();
    let deps: Vec<(u32, usize)> = g
        .points()
        .into_iter()
        .map(|p| {
            let v = g.at(p);
            (v, 1 + all.iter().filter(|d| g.at(add(p, **d, 1)) == v).count())
        })
        .collect();
    size_features(&deps, g.ng, &[], false)
}

pub fn ngtdm_oracle(g: &Grid) -> Vec<f64> {
    let (all, _) = offsets();
    let ng = g.ng;
    let mut s = vec![0.0; ng];
    let mut n = vec![0.0; ng];
    for p in g.points() {
        let nb: Vec<f64> = all.iter().map(|d| g.at(add(p, *d, 1))).filter(|&v| v > 0).map(|v| v as f64).collect();
        if nb.is_empty() {
            continue;
        }
        let v = g.at(p) as usize;
        s[v - 1] += (v as f64 - nb.iter().sum::<f64>() / nb.len() as f64).abs();
        n[v - 1] += 1.0;
    }
    let nv: f64 = n.iter().sum();
    let p: Vec<f64> = n.iter().map(|c| c / nv).collect();
    let occ: Vec<usize> = (0..ng).filter(|&i| p[i] > 0.0).collect();
    let l = |i: usize| (i + 1) as f64;
    let ngp = occ.len() as f64;
    let sum_ps: f64 = occ.iter().map(|&i| p[i] * s[i]).sum();
    let sum_s: f64 = s.iter().sum();
    let mut pairs = [0.0; 4];
    for &i in &occ {
        for &j in &occ {
            pairs[0] += p[i] * p[j] * (l(i) - l(j)).powi(2);
            pairs[1] += (l(i) * p[i] - l(j) * p[j]).abs();
            pairs[2] += (l(i) - l(j)).abs() * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j]);
            pairs[3] += (p[i] + p[j]) * (l(i) - l(j)).powi(2);
        }
    }
    vec![
        if sum_ps > 0.0 { 1.0 / sum_ps } else { f64::NAN },
        if ngp > 1.0 { pairs[0] / (ngp * (ngp - 1.0)) * sum_s / nv } else { f64::NAN },
        if pairs[1] > 0.0 { sum_ps / pairs[1] } else { f64::NAN },
        pairs[2] / nv,
        if sum_s > 0.0 { pairs[3] / sum_s } else { f64::NAN },
    ]
}

pub fn random_grid(seed: u64) -> Grid {
    let mut rng = radstack::seed::rng(seed);
    let dims = [6, 6, 6];
    let ng = rng.random_range(2..=6usize);
    let fill = rng.random_range(0.4..1.0);
    let mut bins: Vec<u32> = (0..216)
        .map(|_| if rng.random_bool(fill) { rng.random_range(1..=ng as u32) } else { 0 })
        .collect();
    bins[0] = 1;
    Grid { dims, bins, ng }
}

pub fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

/// Compare every texture family on one random grid; returns the first mismatch.
pub fn check_seed(seed: u64) -> Result<(), String> {
    let g = random_grid(seed);
    let disc = DiscretizedGrid {
        geometry: Geometry::new(g.dims, [1.0; 3]).unwrap(),
        bins: g.bins.clone(),
        n_bins: g.ng as u32,
    };
    let cases = [
        (Family::Glcm, glcm_oracle(&g)),
        (Family::Glrlm, glrlm_oracle(&g)),
        (Family::Glszm, glszm_oracle(&g)),
        (Family::Gldm, gldm_oracle(&g)),
        (Family::Ngtdm, ngtdm_oracle(&g)),
    ];
    for (fam, expect) in cases {
        let got = texture_features(&disc, fam).map_err(|e| e.to_string())?;
        if got.len() != expect.len() {
            return Err(format!("seed {seed} {fam:?}: {} values, oracle has {}", got.len(), expect.len()));
        }
        for (k, (a, b)) in got.iter().zip(&expect).enumerate() {
            if !close(*a, *b) {
                return Err(format!("seed {seed} {fam:?} {}: {a} vs {b}", fam.names()[k]));
            }
        }
    }
    Ok(())
}
