//! Feature tables for whole cohorts: one per rater, plus the fused consensus
//! scheme, from manifests on disk or from an in-memory synthetic cohort.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::PipelinePaths;
use super::run::{PipelineInputs, SealedLabels};
use super::synth::{SyntheticCohort, SyntheticSubject};
use crate::error::{Error, Result};
use crate::features::{extract_subject, extract_with_mask, rows_to_matrix, ExtractionConfig, SubjectImages};
use crate::fusion::{fuse_multiregion, MAX_ITER, TOL};
use crate::manifest::{CohortManifest, Task};
use crate::matrix::FeatureMatrix;
use crate::stability::RaterStack;
use crate::volume::LabelMask;

pub const FUSED_SCHEME: &str = "staple";

/// Extract one table for `rater` over every subject of a manifest.
pub fn extract_cohort(manifest: &CohortManifest, rater: Option<&str>, config: &ExtractionConfig) -> Result<FeatureMatrix> {
    let rows = manifest
        .subjects
        .par_iter()
        .map(|s| extract_subject(s, rater, config).map_err(|e| e.in_stage(&format!("extract {}", s.id))))
        .collect::<Result<Vec<_>>>()?;
    rows_to_matrix(rows, config)
}

/// Discovery table from reference masks; per-rater and fused tables for the test set.
#[derive(Debug, Clone)]
pub struct CohortTables {
    pub discovery: FeatureMatrix,
    pub discovery_labels: Vec<usize>,
    /// Rater tables in rater order, followed by the fused scheme.
    pub schemes: Vec<(String, FeatureMatrix)>,
    pub rater_names: Vec<String>,
    pub test_ids: Vec<String>,
    pub test_labels: Vec<usize>,
    pub task: Task,
}

impl CohortTables {
    /// Pipeline inputs with the test labels sealed.
    pub fn inputs(&self) -> Result<PipelineInputs> {
        let raters: Vec<FeatureMatrix> = self
            .schemes
            .iter()
            .filter(|(n, _)| self.rater_names.contains(n))
            .map(|(_, m)| m.clone())
            .collect();
        Ok(PipelineInputs {
            discovery: self.discovery.clone(),
            discovery_labels: self.discovery_labels.clone(),
            schemes: self.schemes.clone(),
            raters: Some(RaterStack::new(self.rater_names.clone(), raters)?),
            test_labels: SealedLabels::from_values(self.task, &self.test_ids, &self.test_labels),
        })
    }

    /// Write every table as CSV under `dir`, returning the matching config paths.
    /// Manifest paths are left for the caller to fill in.
    pub fn write(&self, dir: &Path) -> Result<PipelinePaths> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let discovery_features = dir.join("discovery_features.csv");
        self.discovery.write_csv(&discovery_features)?;
        let mut test_features = BTreeMap::new();
        let mut rater_features = BTreeMap::new();
        for (name, m) in &self.schemes {
            let path: PathBuf = dir.join(format!("test_{name}.csv"));
            m.write_csv(&path)?;
            if self.rater_names.contains(name) {
                rater_features.insert(name.clone(), path.clone());
            }
            test_features.insert(name.clone(), path);
        }
        Ok(PipelinePaths {
            discovery_features,
            test_features,
            rater_features,
            ..PipelinePaths::default()
        })
    }
}

fn fused(masks: &[LabelMask]) -> Result<LabelMask> {
    Ok(fuse_multiregion(masks, MAX_ITER, TOL)?.0)
}

/// Rows for one test subject: each rater mask, then the fused consensus.
fn test_rows(s: &SyntheticSubject, config: &ExtractionConfig) -> Result<Vec<Vec<f64>>> {
    let images = SubjectImages::from_volumes(&s.id, &s.volumes, Some(s.age), config)?;
    let fused = fused(&s.raters)?;
    s.raters
        .iter()
        .chain(std::iter::once(&fused))
        .map(|m| Ok(extract_with_mask(&images, m, config)?.values))
        .collect()
}

/// Extract all tables of a synthetic cohort in memory.
pub fn extract_synthetic(cohort: &SyntheticCohort, config: &ExtractionConfig) -> Result<CohortTables> {
    let disc_rows = cohort
        .discovery
        .par_iter()
        .map(|s| {
            let images = SubjectImages::from_volumes(&s.id, &s.volumes, Some(s.age), config)?;
            extract_with_mask(&images, &s.truth, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let discovery = rows_to_matrix(disc_rows, config)?;

    let per_subject = cohort
        .test
        .par_iter()
        .map(|s| test_rows(s, config))
        .collect::<Result<Vec<_>>>()?;
    let rater_names = cohort.spec.rater_names();
    let scheme_names: Vec<String> = rater_names.iter().cloned().chain([FUSED_SCHEME.to_string()]).collect();
    let test_ids: Vec<String> = cohort.test.iter().map(|s| s.id.clone()).collect();
    let schemes = scheme_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values = per_subject.iter().flat_map(|rows| rows[k].iter().copied()).collect();
            Ok((name.clone(), FeatureMatrix::new(config.descriptors(), test_ids.clone(), values)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CohortTables {
        discovery,
        discovery_labels: cohort.discovery.iter().map(|s| s.class).collect(),
        schemes,
        rater_names,
        test_ids,
        test_labels: cohort.test.iter().map(|s| s.class).collect(),
        task: cohort.spec.task,
    })
}

