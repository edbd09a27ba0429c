//! Radiomic feature extraction: first-order, shape and texture families per
//! (region, channel, filter), assembled into one row per subject.

mod firstorder;
mod mc_table;
mod roi;
mod shape;
mod texture;

pub use firstorder::first_order;
pub use roi::{Roi, DIRECTIONS, NO_NEIGHBOR};
pub use shape::{brain_shape, mesh_volume_area, shape_features, surface_voxels};
pub use texture::{
    glcm_features, glcm_matrix, gldm_matrix, glrlm_matrix, glszm_matrix, ngtdm_features, ngtdm_vectors,
    texture_family, Ngtdm, SizeMatrix,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{enumerate_with_filters, Channel, Family, FeatureDescriptor, FilterKind};
use crate::error::{Error, Result};
use crate::filters::{bin_values, filter_bank, DiscretizedGrid, Discretization};
use crate::manifest::SubjectRecord;
use crate::matrix::FeatureMatrix;
use crate::volume::{
    derive_regions, read_label_mask, read_volume, Geometry, LabelMask, RegionMask, TumorRegion, VolumeGrid,
};

/// Texture values of one family on a discretized grid (ROI = voxels with bin > 0).
pub fn texture_features(disc: &DiscretizedGrid, family: Family) -> Result<Vec<f64>> {
    let roi = Roi::from_predicate(disc.geometry, |i| disc.bins[i] > 0);
    if roi.is_empty() {
        return Err(Error::EmptyMask);
    }
    let bins: Vec<u32> = roi.voxels.iter().map(|&i| disc.bins[i]).collect();
    Ok(texture_family(&roi, &bins, disc.n_bins, family))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub discretization: Discretization,
    pub filters: Vec<FilterKind>,
    pub include_age: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            discretization: Discretization::default(),
            filters: FilterKind::default_set(),
            include_age: false,
        }
    }
}

impl ExtractionConfig {
    pub fn descriptors(&self) -> Vec<FeatureDescriptor> {
        enumerate_with_filters(&self.filters, self.include_age)
    }
}

/// One subject's values, aligned with `ExtractionConfig::descriptors`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject_id: String,
    pub values: Vec<f64>,
}

/// Filtered channels of one subject, computed once and shared by every mask.
#[derive(Debug, Clone)]
pub struct SubjectImages {
    pub subject_id: String,
    pub geometry: Geometry,
    pub age: Option<f64>,
    /// `channels[c][f]` is channel `Channel::IMAGING[c]` under filter `config.filters[f]`.
    pub channels: Vec<Vec<VolumeGrid>>,
    /// Voxels where any channel is nonzero.
    pub brain: RegionMask,
}

impl SubjectImages {
    pub fn from_volumes(
        subject_id: &str,
        volumes: &[VolumeGrid; 4],
        age: Option<f64>,
        config: &ExtractionConfig,
    ) -> Result<SubjectImages> {
        let geometry = volumes[0].geometry;
        for v in &volumes[1..] {
            geometry.check_same(&v.geometry)?;
        }
        let brain = RegionMask::new(
            geometry,
            (0..geometry.len()).map(|i| volumes.iter().any(|v| v.values[i] != 0.0)).collect(),
        )?;
        let channels = volumes
            .iter()
            .map(|v| Ok(filter_bank(v, &config.filters)?.into_iter().map(|(_, g)| g).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SubjectImages {
            subject_id: subject_id.to_string(),
            geometry,
            age,
            channels,
            brain,
        })
    }

    pub fn load(record: &SubjectRecord, config: &ExtractionConfig) -> Result<SubjectImages> {
        let mut vols = Vec::with_capacity(4);
        for ch in Channel::IMAGING {
            vols.push(read_volume(record.volume_path(ch)?)?);
        }
        let vols: [VolumeGrid; 4] = vols.try_into().expect("four channels");
        Self::from_volumes(&record.id, &vols, record.age, config)
    }
}

/// First-order plus texture values (84 with the default families) of one
/// filtered image over one ROI.
fn intensity_values(roi: &Roi, image: &VolumeGrid, scheme: Discretization) -> Result<Vec<f64>> {
    let values: Vec<f64> = roi.voxels.iter().map(|&i| image.values[i]).collect();
    let (bins, n_bins) = bin_values(&values, scheme)?;
    let mut out = first_order(&values, &bins, n_bins);
    for fam in Family::TEXTURE {
        out.extend(texture_family(roi, &bins, n_bins, fam));
    }
    Ok(out)
}

fn block_len() -> usize {
    std::iter::once(Family::FirstOrder)
        .chain(Family::TEXTURE)
        .map(|f| f.names().len())
        .sum()
}

/// Feature row for prepared images and one label mask. Empty regions give NaN
/// for every descriptor of that region.
pub fn extract_with_mask(images: &SubjectImages, mask: &LabelMask, config: &ExtractionConfig) -> Result<FeatureRow> {
    images.geometry.check_same(&mask.geometry)?;
    let regions = derive_regions(mask)?;
    let mut values = Vec::new();
    for r in TumorRegion::ALL {
        values.extend(shape_features(regions.get(r)));
    }
    values.extend(brain_shape(&images.brain));

    let rois: Vec<Roi> = TumorRegion::ALL.iter().map(|&r| Roi::from_mask(regions.get(r))).collect();
    let n_filters = config.filters.len();
    let jobs: Vec<(usize, usize, usize)> = (0..3)
        .flat_map(|r| (0..4).flat_map(move |c| (0..n_filters).map(move |f| (r, c, f))))
        .collect();
    let blocks = jobs
        .par_iter()
        .map(|&(r, c, f)| {
            if rois[r].is_empty() {
                Ok(vec![f64::NAN; block_len()])
            } else {
                intensity_values(&rois[r], &images.channels[c][f], config.discretization)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    for b in blocks {
        values.extend(b);
    }
    if config.include_age {
        values.push(images.age.unwrap_or(f64::NAN));
    }
    Ok(FeatureRow {
        subject_id: images.subject_id.clone(),
        values,
    })
}

/// Pick the mask of `rater`, or the first rater in name order when none is given.
pub fn rater_mask_path<'a>(record: &'a SubjectRecord, rater: Option<&str>) -> Result<&'a std::path::Path> {
    match rater {
        Some(name) => record.mask_path(name),
        None => record
            .masks
            .values()
            .next()
            .map(|p| p.as_path())
            .ok_or_else(|| Error::InvalidInput(format!("subject {}: no masks", record.id))),
    }
}

pub fn extract_subject(record: &SubjectRecord, rater: Option<&str>, config: &ExtractionConfig) -> Result<FeatureRow> {
    let images = SubjectImages::load(record, config)?;
    let mask = read_label_mask(rater_mask_path(record, rater)?)?;
    extract_with_mask(&images, &mask, config)
}

pub fn rows_to_matrix(rows: Vec<FeatureRow>, config: &ExtractionConfig) -> Result<FeatureMatrix> {
    let ids = rows.iter().map(|r| r.subject_id.clone()).collect();
    let values = rows.into_iter().flat_map(|r| r.values).collect();
    FeatureMatrix::new(config.descriptors(), ids, values)
}
