//! STAPLE consensus of binary masks and hierarchical WT/TC/ENC label fusion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{derive_regions, LabelMask, RegionMask, TumorRegion, LABEL_ENC, LABEL_NEC, LABEL_PTE};

const INIT: f64 = 0.99;

/// Default EM iteration cap and convergence tolerance on the weights.
pub const MAX_ITER: usize = 100;
pub const TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StapleResult {
    /// Posterior foreground probability per voxel.
    #[serde(skip)]
    pub weights: Vec<f64>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub prior: f64,
    pub iterations: usize,
    pub converged: bool,
    /// All inputs empty: consensus is empty and p/q stay at their initial values.
    pub degenerate: bool,
    /// Observed-data log-likelihood before each M-step.
    pub log_likelihood: Vec<f64>,
}

impl StapleResult {
    /// Voxels with W >= 0.5.
    pub fn consensus(&self, like: &RegionMask) -> RegionMask {
        RegionMask {
            geometry: like.geometry,
            voxels: self.weights.iter().map(|&w| w >= 0.5).collect(),
        }
    }
}

/// Distinct rater-decision patterns with their voxel counts, plus the pattern
/// index of every voxel.
fn patterns(masks: &[&RegionMask]) -> (Vec<(Vec<bool>, f64)>, Vec<usize>) {
    let n = masks[0].voxels.len();
    let mut ids: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    let mut keys = Vec::with_capacity(n);
    for i in 0..n {
        let key: Vec<bool> = masks.iter().map(|m| m.voxels[i]).collect();
        keys.push(key.clone());
        let next = ids.len();
        ids.entry(key).or_insert(next);
    }
    let mut table = vec![(Vec::new(), 0.0); ids.len()];
    for (k, &id) in &ids {
        table[id].0 = k.clone();
    }
    let voxel_ids: Vec<usize> = keys.iter().map(|k| ids[k]).collect();
    for &id in &voxel_ids {
        table[id].1 += 1.0;
    }
    (table, voxel_ids)
}

pub fn staple_binary(masks: &[&RegionMask], max_iter: usize, tol: f64) -> Result<StapleResult> {
    let j = masks.len();
    if j < 2 {
        return Err(Error::InvalidInput("STAPLE needs at least two raters".into()));
    }
    for m in &masks[1..] {
        masks[0].geometry.check_same(&m.geometry)?;
    }
    let n = masks[0].voxels.len() as f64;
    let prior = masks.iter().map(|m| m.count() as f64).sum::<f64>() / (j as f64 * n);
    let mut p = vec![INIT; j];
    let mut q = vec![INIT; j];
    if prior == 0.0 {
        return Ok(StapleResult {
            weights: vec![0.0; masks[0].voxels.len()],
            sensitivity: p,
            specificity: q,
            prior,
            iterations: 0,
            converged: true,
            degenerate: true,
            log_likelihood: Vec::new(),
        });
    }
    let (table, voxel_ids) = patterns(masks);
    let mut w = vec![f64::NAN; table.len()];
    let mut log_likelihood = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut change: f64 = 0.0;
        let mut ll = 0.0;
        for (k, (pat, count)) in table.iter().enumerate() {
            let (mut a, mut b) = (prior, 1.0 - prior);
            for r in 0..j {
                if pat[r] {
                    a *= p[r];
                    b *= 1.0 - q[r];
                } else {
                    a *= 1.0 - p[r];
                    b *= q[r];
                }
            }
            let wk = if a + b > 0.0 { a / (a + b) } else { prior };
            ll += count * (a + b).ln();
            change = change.max(if w[k].is_nan() { f64::INFINITY } else { (wk - w[k]).abs() });
            w[k] = wk;
        }
        log_likelihood.push(ll);
        for r in 0..j {
            let (mut tp, mut fg, mut tn, mut bg) = (0.0, 0.0, 0.0, 0.0);
            for (k, (pat, count)) in table.iter().enumerate() {
                fg += count * w[k];
                bg += count * (1.0 - w[k]);
                if pat[r] {
                    tp += count * w[k];
                } else {
                    tn += count * (1.0 - w[k]);
                }
            }
            if fg > 0.0 {
                p[r] = tp / fg;
            }
            if bg > 0.0 {
                q[r] = tn / bg;
            }
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(StapleResult {
        weights: voxel_ids.iter().map(|&k| w[k]).collect(),
        sensitivity: p,
        specificity: q,
        prior,
        iterations,
        converged,
        degenerate: false,
        log_likelihood,
    })
}

/// STAPLE on each derived region stack, then nesting TC' = TC & WT and
/// ENC' = ENC & TC'.
pub fn fuse_multiregion(masks: &[LabelMask], max_iter: usize, tol: f64) -> Result<(LabelMask, Vec<StapleResult>)> {
    if masks.is_empty() {
        return Err(Error::InvalidInput("no masks to fuse".into()));
    }
    for m in &masks[1..] {
        masks[0].geometry.check_same(&m.geometry)?;
    }
    let derived = masks.iter().map(derive_regions).collect::<Result<Vec<_>>>()?;
    let mut consensus = Vec::new();
    let mut reports = Vec::new();
    for region in TumorRegion::ALL {
        let stack: Vec<&RegionMask> = derived.iter().map(|d| d.get(region)).collect();
        let res = staple_binary(&stack, max_iter, tol)?;
        consensus.push(res.consensus(stack[0]));
        reports.push(res);
    }
    let labels = (0..masks[0].labels.len())
        .map(|i| {
            let wt = consensus[0].voxels[i];
            let tc = consensus[1].voxels[i] && wt;
            let enc = consensus[2].voxels[i] && tc;
            if enc {
                LABEL_ENC
            } else if tc {
                LABEL_NEC
            } else if wt {
                LABEL_PTE
            } else {
                0
            }
        })
        .collect();
    Ok((LabelMask::new(masks[0].geometry, labels)?, reports))
}
