//! BraTS-style ranking of segmentation methods and its permutation test.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::stats::midranks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegMetric {
    #[serde(rename = "DSC")]
    Dsc,
    #[serde(rename = "HD95")]
    Hd95,
}

/// One (subject, region, metric) cell with a value per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub subject: String,
    pub region: String,
    pub metric: SegMetric,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub methods: Vec<String>,
    pub cells: Vec<MetricCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub methods: Vec<String>,
    /// Per-cell method ranks (1 = best, ties averaged), aligned with the input cells.
    pub cell_ranks: Vec<Vec<f64>>,
    pub cumulative: Vec<f64>,
    /// Ordinal rank of the cumulative ranks (1 = best; equal cumulative ranks share a place).
    pub frs: Vec<usize>,
}

impl MetricTable {
    fn validate(&self) -> Result<()> {
        if self.methods.len() < 2 {
            return Err(Error::InvalidInput("ranking needs at least two methods".into()));
        }
        for c in &self.cells {
            if c.values.len() != self.methods.len() || c.values.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidInput(format!(
                    "missing value in cell ({}, {}, {:?})",
                    c.subject, c.region, c.metric
                )));
            }
        }
        if self.cells.is_empty() {
            return Err(Error::InvalidInput("empty metric table".into()));
        }
        Ok(())
    }

    pub fn method_index(&self, name: &str) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {name:?}")))
    }
}

fn rank_cell(c: &MetricCell) -> Vec<f64> {
    // Higher Dice is better; lower HD95 is better.
    let keyed: Vec<f64> = match c.metric {
        SegMetric::Dsc => c.values.iter().map(|v| -v).collect(),
        SegMetric::Hd95 => c.values.clone(),
    };
    midranks(&keyed)
}

pub fn frs_rank(table: &MetricTable) -> Result<RankingTable> {
    table.validate()?;
    let cell_ranks: Vec<Vec<f64>> = table.cells.iter().map(rank_cell).collect();
    let m = table.methods.len();
    let cumulative: Vec<f64> = (0..m)
        .map(|j| cell_ranks.iter().map(|r| r[j]).sum::<f64>() / cell_ranks.len() as f64)
        .collect();
    let frs = cumulative
        .iter()
        .map(|c| 1 + cumulative.iter().filter(|o| *o < c).count())
        .collect();
    Ok(RankingTable {
        methods: table.methods.clone(),
        cell_ranks,
        cumulative,
        frs,
    })
}

/// Two-sided permutation p-value for the cumulative-rank difference of two
/// methods; each permutation swaps the pair's ranks for a random half of the
/// subjects. Add-one smoothed.
pub fn perm_test(table: &MetricTable, method_a: &str, method_b: &str, n_perm: usize, seed: u64) -> Result<f64> {
    let ranking = frs_rank(table)?;
    let (a, b) = (table.method_index(method_a)?, table.method_index(method_b)?);
    let mut subjects: Vec<&str> = table.cells.iter().map(|c| c.subject.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let mut per_subject = vec![0.0; subjects.len()];
    for (c, r) in table.cells.iter().zip(&ranking.cell_ranks) {
        let s = subjects.binary_search(&c.subject.as_str()).expect("subject present");
        per_subject[s] += r[a] - r[b];
    }
    let n_cells = table.cells.len() as f64;
    let observed = (per_subject.iter().sum::<f64>() / n_cells).abs();
    const BLOCK: usize = 1024;
    let n_blocks = n_perm.div_ceil(BLOCK);
    let hits: usize = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = seed::rng(seed::derive(seed, blk as u64));
            let count = BLOCK.min(n_perm - blk * BLOCK);
            (0..count)
                .filter(|_| {
                    let d: f64 = per_subject.iter().map(|&v| if rng.random_bool(0.5) { -v } else { v }).sum();
                    (d / n_cells).abs() >= observed - 1e-12
                })
                .count()
        })
        .sum();
    Ok((1 + hits) as f64 / (1 + n_perm) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(subject: &str, region: &str, metric: SegMetric, values: &[f64]) -> MetricCell {
        MetricCell {
            subject: subject.into(),
            region: region.into(),
            metric,
            values: values.to_vec(),
        }
    }

    #[test]
    fn hand_built_three_methods() {
        let table = MetricTable {
            methods: vec!["A".into(), "B".into(), "C".into()],
            cells: vec![
                cell("s1", "WT", SegMetric::Dsc, &[0.9, 0.8, 0.8]),
                cell("s1", "WT", SegMetric::Hd95, &[3.0, 2.0, 5.0]),
                cell("s2", "WT", SegMetric::Dsc, &[0.7, 0.9, 0.6]),
                cell("s2", "WT", SegMetric::Hd95, &[1.0, 1.0, 1.0]),
            ],
        };
        let r = frs_rank(&table).unwrap();
        assert_eq!(r.cell_ranks[0], vec![1.0, 2.5, 2.5]);
        assert_eq!(r.cell_ranks[1], vec![2.0, 1.0, 3.0]);
        assert_eq!(r.cumulative, vec![(1.0 + 2.0 + 2.0 + 2.0) / 4.0, (2.5 + 1.0 + 1.0 + 2.0) / 4.0, (2.5 + 3.0 + 3.0 + 2.0) / 4.0]);
        assert_eq!(r.frs, vec![2, 1, 3]);
    }

    #[test]
    fn dominance_and_identity() {
        let mut dom = MetricTable { methods: vec!["A".into(), "B".into()], cells: vec![] };
        let mut same = dom.clone();
        for s in 0..12 {
            for region in ["WT", "TC", "ENC"] {
                let id = format!("s{s}");
                dom.cells.push(cell(&id, region, SegMetric::Dsc, &[0.9, 0.7]));
                dom.cells.push(cell(&id, region, SegMetric::Hd95, &[2.0, 6.0]));
                same.cells.push(cell(&id, region, SegMetric::Dsc, &[0.8, 0.8]));
            }
        }
        assert_eq!(frs_rank(&dom).unwrap().frs, vec![1, 2]);
        assert!(perm_test(&dom, "A", "B", 20_000, 1).unwrap() <= 0.01);
        assert_eq!(perm_test(&same, "A", "B", 1_000, 1).unwrap(), 1.0);
        assert!(frs_rank(&MetricTable { methods: vec!["A".into()], cells: vec![] }).is_err());
    }
}
