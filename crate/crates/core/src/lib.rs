//! Multiregional radiomics toolkit: feature extraction from 3D multi-parametric
//! volumes, rater-agreement stability filtering, feature selection, forest
//! ensembles, multi-rater label fusion and the evaluation stack.

pub mod descriptor;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod filters;
pub mod fusion;
pub mod manifest;
pub mod matrix;
pub mod modeling;
pub mod pipeline;
pub mod seed;
pub mod selection;
pub mod stability;
pub mod stats;
pub mod tableprep;
pub mod volume;

pub use descriptor::{Channel, Family, FeatureDescriptor, FilterKind, Region};
pub use error::{Error, Result};
pub use manifest::{CohortManifest, SubjectLabel, SubjectRecord, Task};
pub use matrix::FeatureMatrix;
pub use volume::{LabelMask, RegionMask, VolumeGrid};
