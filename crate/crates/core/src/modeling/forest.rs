//! CART classification trees (weighted gini) and bootstrap random forests.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Count(c) => c,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyper {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub balanced: bool,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_estimators: 200,
            max_features: MaxFeatures::Sqrt,
            balanced: true,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_proba(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { probs } => return probs,
            }
        }
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    /// Per-sample weight (bootstrap multiplicity times class weight).
    w: Vec<f64>,
    n_classes: usize,
    max_features: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

fn gini(dist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - dist.iter().map(|d| (d / total).powi(2)).sum::<f64>()
}

impl Builder<'_> {
    fn distribution(&self, idx: &[usize]) -> Vec<f64> {
        let mut d = vec![0.0; self.n_classes];
        for &i in idx {
            d[self.y[i]] += self.w[i];
        }
        d
    }

    /// Best (weighted impurity decrease, threshold) on one feature, if any split is valid.
    fn best_split(&self, idx: &[usize], feature: usize, parent: &[f64], total: f64) -> Option<(f64, f64)> {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.x[a][feature].partial_cmp(&self.x[b][feature]).unwrap().then(a.cmp(&b)));
        let mut left = vec![0.0; self.n_classes];
        let mut left_w = 0.0;
        let mut best: Option<(f64, f64)> = None;
        let n = order.len();
        for k in 0..n - 1 {
            let i = order[k];
            left[self.y[i]] += self.w[i];
            left_w += self.w[i];
            let (v, next) = (self.x[i][feature], self.x[order[k + 1]][feature]);
            if v == next || k + 1 < self.min_leaf || n - k - 1 < self.min_leaf {
                continue;
            }
            let right: Vec<f64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let right_w = total - left_w;
            let child = (left_w * gini(&left, left_w) + right_w * gini(&right, right_w)) / total;
            let score = gini(parent, total) - child;
            if best.is_none_or(|(s, _)| score > s) {
                let mut t = v + (next - v) / 2.0;
                if t >= next {
                    t = v;
                }
                best = Some((score, t));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, rng: &mut impl Rng) -> usize {
        let dist = self.distribution(&idx);
        let total: f64 = dist.iter().sum();
        let slot = self.nodes.len();
        let pure = dist.iter().filter(|&&d| d > 0.0).count() <= 1;
        let probs: Vec<f64> = dist.iter().map(|d| d / total).collect();
        self.nodes.push(Node::Leaf { probs });
        if pure || idx.len() < 2 * self.min_leaf {
            return slot;
        }
        let p = self.x[0].len();
        let mut features: Vec<usize> = (0..p).collect();
        features.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.max_features && best.is_some() {
                break;
            }
            if let Some((score, t)) = self.best_split(&idx, f, &dist, total) {
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, f, t));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

fn class_weights(y: &[usize], n_classes: usize, balanced: bool) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        counts[c] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count() as f64;
    counts
        .iter()
        .map(|&c| {
            if !balanced || c == 0 {
                1.0
            } else {
                y.len() as f64 / (present * c as f64)
            }
        })
        .collect()
}

fn check_training(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.is_empty() || x[0].is_empty() {
        return Err(Error::InvalidInput("empty training matrix".into()));
    }
    if y.iter().any(|&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!("class index outside 0..{n_classes}")));
    }
    let first = y[0];
    if y.iter().all(|&c| c == first) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn train_tree(x: &[Vec<f64>], y: &[usize], n_classes: usize, hyper: &ForestHyper, seed: u64) -> Result<Tree> {
    check_training(x, y, n_classes)?;
    let mut rng = seed::rng(seed);
    let cw = class_weights(y, n_classes, hyper.balanced);
    let n = x.len();
    let mut counts = vec![0.0; n];
    if hyper.bootstrap {
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1.0;
        }
    } else {
        counts.fill(1.0);
    }
    let idx: Vec<usize> = (0..n).filter(|&i| counts[i] > 0.0).collect();
    let w = (0..n).map(|i| counts[i] * cw[y[i]]).collect();
    let mut b = Builder {
        x,
        y,
        w,
        n_classes,
        max_features: hyper.max_features.resolve(x[0].len()),
        min_leaf: hyper.min_samples_leaf.max(1),
        nodes: Vec::new(),
    };
    b.grow(idx, &mut rng);
    Ok(Tree { nodes: b.nodes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_classes: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Mean of the per-tree leaf distributions.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.predict_proba(row)) {
                *o += p;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }
}

pub fn train_forest(x: &[Vec<f64>], y: &[usize], n_classes: usize, hyper: &ForestHyper, seed: u64) -> Result<Forest> {
    check_training(x, y, n_classes)?;
    let trees = (0..hyper.n_estimators as u64)
        .into_par_iter()
        .map(|t| train_tree(x, y, n_classes, hyper, seed::derive(seed, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { n_classes, seed, trees })
}

/// Index of the largest probability; ties go to the lower class index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}
