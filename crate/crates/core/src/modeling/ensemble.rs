//! Soft-voting ensemble of independently seeded forests and its on-disk format.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::forest::{argmax, train_forest, Forest, ForestHyper};
use crate::descriptor::FeatureDescriptor;
use crate::error::{Error, Result};
use crate::seed;
use crate::tableprep::ColumnStats;

pub const MODEL_MAGIC: &[u8; 8] = b"RADSTKMD";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestEnsembleModel {
    pub n_classes: usize,
    pub master_seed: u64,
    pub hyper: ForestHyper,
    /// Feature columns the forests were trained on, in order.
    pub selected: Vec<FeatureDescriptor>,
    /// Discovery cleaning statistics for the selected columns.
    pub stats: Option<ColumnStats>,
    pub forests: Vec<Forest>,
}

impl ForestEnsembleModel {
    /// Unweighted mean of the per-forest probability vectors.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for f in &self.forests {
            for (o, p) in out.iter_mut().zip(f.predict_proba(row)) {
                *o += p;
            }
        }
        let n = self.forests.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.par_iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn predict_labels(&self, x: &[Vec<f64>]) -> Vec<usize> {
        self.predict(x).iter().map(|p| argmax(p)).collect()
    }
}

/// Train `n_forests` forests on identical data; forest `i` uses seed
/// `derive(master_seed, i)`.
pub fn train_ensemble(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    hyper: &ForestHyper,
    n_forests: usize,
    master_seed: u64,
) -> Result<ForestEnsembleModel> {
    let forests = (0..n_forests as u64)
        .into_par_iter()
        .map(|i| train_forest(x, y, n_classes, hyper, seed::derive(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestEnsembleModel {
        n_classes,
        master_seed,
        hyper: hyper.clone(),
        selected: Vec::new(),
        stats: None,
        forests,
    })
}

/// Layout: magic (8) | version u32 LE | payload length u64 LE | sha256 (32) | JSON payload.
pub fn encode_model(model: &ForestEnsembleModel) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(model).map_err(|e| Error::parse("model", e))?;
    let mut out = Vec::with_capacity(payload.len() + 52);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<ForestEnsembleModel> {
    if bytes.len() < 52 || &bytes[..8] != MODEL_MAGIC {
        return Err(Error::parse("model", "not a model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::Version(version));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let payload = &bytes[52..];
    if payload.len() != len || Sha256::digest(payload).as_slice() != &bytes[20..52] {
        return Err(Error::Checksum);
    }
    serde_json::from_slice(payload).map_err(|e| Error::parse("model", e))
}

pub fn save_model(model: &ForestEnsembleModel, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ForestEnsembleModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeling::forest::{Node, Tree};
    use rand::Rng;

    fn toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::rng(21);
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = x.iter().map(|r| (r[0] > 0.1) as usize).collect();
        (x, y)
    }

    fn stump(p1: f64) -> Forest {
        Forest {
            n_classes: 2,
            seed: 0,
            trees: vec![Tree {
                nodes: vec![Node::Leaf { probs: vec![1.0 - p1, p1] }],
            }],
        }
    }

    #[test]
    fn soft_vote_is_mean() {
        let (x, y) = toy();
        let mut m = train_ensemble(&x, &y, 2, &ForestHyper { n_estimators: 5, ..Default::default() }, 2, 1).unwrap();
        m.forests = vec![stump(0.2), stump(0.8)];
        assert_eq!(m.predict_proba(&[0.0, 0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(m.predict_labels(&[vec![0.0; 3]]), vec![0]);
    }

    #[test]
    fn forest_order_does_not_matter() {
        let (x, y) = toy();
        let m = train_ensemble(&x, &y, 2, &ForestHyper { n_estimators: 10, ..Default::default() }, 6, 4).unwrap();
        let mut r = m.clone();
        r.forests.reverse();
        // Same multiset of forests; reversed summation order may differ in the last bit
        // only if the sums are not exact, so compare on the full probe set.
        for row in &x {
            let (a, b) = (m.predict_proba(row), r.predict_proba(row));
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn persistence_round_trip_and_tamper() {
        let (x, y) = toy();
        let m = train_ensemble(&x, &y, 2, &ForestHyper { n_estimators: 8, ..Default::default() }, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.predict(&x), m.predict(&x));
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 5;
        bytes[last] ^= 0x01;
        assert!(matches!(decode_model(&bytes), Err(Error::Checksum)));
        let mut bytes = encode_model(&m).unwrap();
        bytes[8] = 2;
        assert!(matches!(decode_model(&bytes), Err(Error::Version(2))));
    }
}
