//! Pipeline configuration (TOML) with path resolution and a provenance hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::ExtractionConfig;
use crate::manifest::Task;
use crate::modeling::ForestHyper;
use crate::selection::{MrmrScheme, SelectorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoteMode {
    /// Oversample only when the training classes are unequal.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelinePaths {
    /// Discovery manifest; supplies the training labels.
    pub discovery_manifest: PathBuf,
    /// Discovery feature table (CSV).
    pub discovery_features: PathBuf,
    /// Test manifest; its labels are read only in the evaluate stage.
    pub test_manifest: PathBuf,
    /// One test feature table per segmentation scheme.
    pub test_features: BTreeMap<String, PathBuf>,
    /// Per-rater feature tables used for stability filtering.
    pub rater_features: BTreeMap<String, PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub task: Task,
    /// Run the stability-filtered experiment next to the unfiltered one.
    pub stability_filtering: bool,
    pub tau: f64,
    pub selector: SelectorKind,
    pub mrmr_scheme: MrmrScheme,
    pub n_features: usize,
    pub n_forests: usize,
    pub smote: SmoteMode,
    pub smote_k: usize,
    /// Oversample before selection instead of after it.
    pub smote_before_selection: bool,
    pub include_age: bool,
    /// Stratified splits per feature for the reported uAUC; 0 skips it.
    pub uauc_iters: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses the runtime default. Never affects results.
    pub threads: usize,
    pub forest: ForestHyper,
    pub extraction: ExtractionConfig,
    pub paths: PipelinePaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            task: Task::IDH,
            stability_filtering: true,
            tau: 0.95,
            selector: SelectorKind::Mrmr,
            mrmr_scheme: MrmrScheme::Quotient,
            n_features: 10,
            n_forests: 50,
            smote: SmoteMode::Auto,
            smote_k: 5,
            smote_before_selection: false,
            include_age: false,
            uauc_iters: 100,
            master_seed: 0,
            threads: 0,
            forest: ForestHyper::default(),
            extraction: ExtractionConfig::default(),
            paths: PipelinePaths::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if !p.as_os_str().is_empty() && p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_features < 1 {
            return Err(Error::InvalidInput("n_features must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidInput(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.n_forests < 1 || self.forest.n_estimators < 1 {
            return Err(Error::InvalidInput("ensemble needs at least one forest and one tree".into()));
        }
        if self.smote_k < 1 {
            return Err(Error::InvalidInput("smote_k must be at least 1".into()));
        }
        Ok(())
    }

    /// Validate paths for a file-driven run.
    pub fn validate_paths(&self) -> Result<()> {
        let p = &self.paths;
        let required = [
            ("discovery_manifest", &p.discovery_manifest),
            ("discovery_features", &p.discovery_features),
            ("test_manifest", &p.test_manifest),
        ];
        for (name, path) in required {
            if path.as_os_str().is_empty() {
                return Err(Error::InvalidInput(format!("paths.{name} is not set")));
            }
        }
        if p.test_features.is_empty() {
            return Err(Error::InvalidInput("paths.test_features is empty".into()));
        }
        if self.stability_filtering && p.rater_features.len() < 2 {
            return Err(Error::InvalidInput(
                "stability filtering needs at least two entries in paths.rater_features".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::parse("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parse a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [
            &mut p.discovery_manifest,
            &mut p.discovery_features,
            &mut p.test_manifest,
            &mut p.output_dir,
        ] {
            resolve(base, path);
        }
        for path in p.test_features.values_mut().chain(p.rater_features.values_mut()) {
            resolve(base, path);
        }
    }

    /// SHA-256 of the settings that determine results. Thread count and the
    /// output directory are excluded; table paths are reduced to file names.
    pub fn result_hash(&self) -> String {
        let mut canon = self.clone();
        canon.threads = 0;
        canon.paths.output_dir = PathBuf::new();
        let base = |p: &mut PathBuf| {
            if let Some(name) = p.file_name() {
                *p = PathBuf::from(name);
            }
        };
        let paths = &mut canon.paths;
        for p in [&mut paths.discovery_manifest, &mut paths.discovery_features, &mut paths.test_manifest] {
            base(p);
        }
        for p in paths.test_features.values_mut().chain(paths.rater_features.values_mut()) {
            base(p);
        }
        hex::encode(Sha256::digest(canon.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = PipelineConfig::default();
        cfg.paths.test_features.insert("rater1".into(), "t1.csv".into());
        let back = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_takes_defaults() {
        let cfg = PipelineConfig::from_toml("task = \"OS\"\nselector = \"rfe-svm\"\n").unwrap();
        assert_eq!(cfg.task, Task::OS);
        assert_eq!(cfg.selector, SelectorKind::RfeSvm);
        assert_eq!(cfg.n_forests, 50);
        assert_eq!(cfg.tau, 0.95);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::from_toml("n_features = 0").is_err());
        assert!(PipelineConfig::from_toml("tau = 1.5").is_err());
        assert!(PipelineConfig::from_toml("tau = 0.0").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn hash_ignores_threads_and_output_dir() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.threads = 4;
        b.paths.output_dir = "/elsewhere".into();
        assert_eq!(a.result_hash(), b.result_hash());
        b.master_seed = 1;
        assert_ne!(a.result_hash(), b.result_hash());
    }

    #[test]
    fn relative_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[paths]\ndiscovery_features = \"d.csv\"\n[paths.test_features]\nx = \"/abs/t.csv\"\n")
            .unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.paths.discovery_features, dir.path().join("d.csv"));
        assert_eq!(cfg.paths.test_features["x"], PathBuf::from("/abs/t.csv"));
    }
}
