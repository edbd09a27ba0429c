//! Cohort manifests: subject records with image/mask paths, outcome labels and age.
//!
//! Manifests are JSON documents; relative paths resolve against the
//! directory holding the manifest file.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descriptor::Channel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    IDH,
    OS,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::IDH => 2,
            Task::OS => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectLabel {
    pub task: Task,
    pub value: i64,
}

impl SubjectLabel {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.task {
            Task::IDH => (0..=1).contains(&self.value),
            Task::OS => (0..=2).contains(&self.value),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLabel(format!(
                "{:?} label value {} out of range",
                self.task, self.value
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    #[serde(default)]
    pub volumes: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub masks: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SubjectLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<f64>,
}

impl SubjectRecord {
    pub fn volume_path(&self, channel: Channel) -> Result<&Path> {
        self.volumes
            .get(channel.token())
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::InvalidInput(format!("subject {}: missing channel {}", self.id, channel.token())))
    }

    pub fn mask_path(&self, rater: &str) -> Result<&Path> {
        self.masks
            .get(rater)
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::InvalidInput(format!("subject {}: no mask for rater {rater:?}", self.id)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CohortManifest {
    pub subjects: Vec<SubjectRecord>,
}

impl CohortManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateSubject(s.id.clone()));
            }
            if let Some(l) = &s.label {
                l.validate()?;
            }
            for key in s.volumes.keys() {
                let ch = Channel::parse(key)?;
                if ch == Channel::None {
                    return Err(Error::InvalidInput(format!("subject {}: channel NONE", s.id)));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: CohortManifest = serde_json::from_str(text).map_err(|e| Error::parse("manifest", e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Copy of the manifest with all outcome labels removed.
    pub fn strip_labels(&self) -> CohortManifest {
        CohortManifest {
            subjects: self
                .subjects
                .iter()
                .map(|s| SubjectRecord {
                    label: None,
                    ..s.clone()
                })
                .collect(),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.id == id)
    }
}

/// Parse and validate a manifest, resolving relative paths against its directory.
pub fn load_manifest(path: &Path) -> Result<CohortManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m = CohortManifest::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for s in &mut m.subjects {
        for p in s.volumes.values_mut().chain(s.masks.values_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"subjects":[
        {"id":"s1","volumes":{"T1":"a.rawvol"},"masks":{"manual":"m.rawvol"},"label":{"task":"IDH","value":0},"age":50.0},
        {"id":"s2","label":{"task":"IDH","value":1}}]}"#;

    #[test]
    fn parses_two_subjects() {
        let m = CohortManifest::from_json(TWO).unwrap();
        assert_eq!(m.subjects.len(), 2);
        assert_eq!(m.subjects[0].age, Some(50.0));
        let back = CohortManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = r#"{"subjects":[{"id":"s1"},{"id":"s1"}]}"#;
        let err = CohortManifest::from_json(text).unwrap_err();
        assert!(err.to_string().contains("duplicate subject id"));
    }

    #[test]
    fn os_label_out_of_range() {
        let text = r#"{"subjects":[{"id":"s1","label":{"task":"OS","value":3}}]}"#;
        let err = CohortManifest::from_json(text).unwrap_err();
        assert!(err.to_string().contains("invalid label"));
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cohort.json");
        fs::write(&p, TWO).unwrap();
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.subjects[0].volumes["T1"], dir.path().join("a.rawvol"));
    }

    #[test]
    fn strip_removes_labels() {
        let m = CohortManifest::from_json(TWO).unwrap().strip_labels();
        assert!(m.subjects.iter().all(|s| s.label.is_none()));
    }
}
