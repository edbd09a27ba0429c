//! Voxel grids, label masks and the `rawvol v1` on-disk format.
//!
//! A volume is stored as a JSON sidecar header (`name.rawvol`) next to a raw
//! little-endian payload (`name.raw`). Values are kept x-fastest:
//! `index = x + nx * (y + ny * z)`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "spacing must be strictly positive, got {spacing_mm:?}"
            )));
        }
        Ok(Geometry { dims, spacing_mm })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Physical position of a voxel center in mm.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [
            c[0] as f64 * self.spacing_mm[0],
            c[1] as f64 * self.spacing_mm[1],
            c[2] as f64 * self.spacing_mm[2],
        ]
    }

    /// Length of the physical diagonal of the field of view.
    pub fn diagonal_mm(&self) -> f64 {
        (0..3)
            .map(|a| {
                let l = self.dims[a] as f64 * self.spacing_mm[a];
                l * l
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_same(&self, other: &Geometry) -> Result<()> {
        if self.dims != other.dims || self.spacing_mm != other.spacing_mm {
            return Err(Error::Geometry(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.dims, self.spacing_mm, other.dims, other.spacing_mm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    pub geometry: Geometry,
    pub values: Vec<f64>,
}

impl VolumeGrid {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], values: Vec<f64>) -> Result<Self> {
        let geometry = Geometry::new(dims, spacing_mm)?;
        if values.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                actual: values.len(),
            });
        }
        Ok(VolumeGrid { geometry, values })
    }

    pub fn filled(geometry: Geometry, value: f64) -> Self {
        VolumeGrid {
            geometry,
            values: vec![value; geometry.len()],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.geometry.index(x, y, z)]
    }
}

/// BraTS-style label codes.
pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_NEC: u8 = 1;
pub const LABEL_PTE: u8 = 2;
pub const LABEL_ENC: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    pub geometry: Geometry,
    pub labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(geometry: Geometry, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                actual: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| !matches!(l, 0 | 1 | 2 | 4)) {
            return Err(Error::InvalidLabel(format!("unknown label value {bad}")));
        }
        Ok(LabelMask { geometry, labels })
    }

    pub fn from_volume(vol: &VolumeGrid) -> Result<Self> {
        let mut labels = Vec::with_capacity(vol.values.len());
        for &v in &vol.values {
            if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                return Err(Error::InvalidLabel(format!("non-integer label value {v}")));
            }
            labels.push(v as u8);
        }
        LabelMask::new(vol.geometry, labels)
    }

    pub fn to_volume(&self) -> VolumeGrid {
        VolumeGrid {
            geometry: self.geometry,
            values: self.labels.iter().map(|&l| l as f64).collect(),
        }
    }
}

/// Overlapping tumor regions derived from the label codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TumorRegion {
    WT,
    TC,
    ENC,
}

impl TumorRegion {
    pub const ALL: [TumorRegion; 3] = [TumorRegion::WT, TumorRegion::TC, TumorRegion::ENC];

    pub fn contains_label(self, label: u8) -> bool {
        match self {
            TumorRegion::WT => matches!(label, LABEL_NEC | LABEL_PTE | LABEL_ENC),
            TumorRegion::TC => matches!(label, LABEL_NEC | LABEL_ENC),
            TumorRegion::ENC => label == LABEL_ENC,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub geometry: Geometry,
    pub voxels: Vec<bool>,
}

impl RegionMask {
    pub fn new(geometry: Geometry, voxels: Vec<bool>) -> Result<Self> {
        if voxels.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                actual: voxels.len(),
            });
        }
        Ok(RegionMask { geometry, voxels })
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.voxels.iter().any(|&v| v)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.voxels
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
            .collect()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.voxels.iter().zip(&other.voxels).all(|(&a, &b)| !a || b)
    }
}

/// Nested overlapping regions plus the non-overlapping subregions they are
/// built from.
#[derive(Debug, Clone)]
pub struct DerivedRegions {
    pub wt: RegionMask,
    pub tc: RegionMask,
    pub enc: RegionMask,
    pub pte: RegionMask,
    pub nec: RegionMask,
}

impl DerivedRegions {
    pub fn get(&self, region: TumorRegion) -> &RegionMask {
        match region {
            TumorRegion::WT => &self.wt,
            TumorRegion::TC => &self.tc,
            TumorRegion::ENC => &self.enc,
        }
    }
}

pub fn derive_regions(mask: &LabelMask) -> Result<DerivedRegions> {
    let g = mask.geometry;
    let n = g.len();
    let mut out = [
        vec![false; n],
        vec![false; n],
        vec![false; n],
        vec![false; n],
        vec![false; n],
    ];
    for (i, &l) in mask.labels.iter().enumerate() {
        match l {
            LABEL_BACKGROUND => {}
            LABEL_NEC => {
                out[0][i] = true;
                out[1][i] = true;
                out[4][i] = true;
            }
            LABEL_PTE => {
                out[0][i] = true;
                out[3][i] = true;
            }
            LABEL_ENC => {
                out[0][i] = true;
                out[1][i] = true;
                out[2][i] = true;
            }
            other => return Err(Error::InvalidLabel(format!("unknown label value {other}"))),
        }
    }
    let [wt, tc, enc, pte, nec] = out;
    Ok(DerivedRegions {
        wt: RegionMask { geometry: g, voxels: wt },
        tc: RegionMask { geometry: g, voxels: tc },
        enc: RegionMask { geometry: g, voxels: enc },
        pte: RegionMask { geometry: g, voxels: pte },
        nec: RegionMask { geometry: g, voxels: nec },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32le")]
    F32Le,
    #[serde(rename = "u8")]
    U8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawvolHeader {
    format: String,
    version: u32,
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    dtype: String,
    order: String,
}

/// Payload path paired with a header path (`x.rawvol` -> `x.raw`).
pub fn payload_path(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

pub fn read_volume(path: &Path) -> Result<VolumeGrid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: RawvolHeader =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    if header.format != "rawvol" || header.version != 1 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    if header.order != "x-fastest" {
        return Err(Error::parse(
            path.display().to_string(),
            format!("unsupported order {}", header.order),
        ));
    }
    let geometry = Geometry::new(header.dims, header.spacing_mm)?;
    let payload_file = payload_path(path);
    let bytes = fs::read(&payload_file).map_err(|e| Error::io(&payload_file, e))?;
    let values = match header.dtype.as_str() {
        "f32le" => {
            if bytes.len() != geometry.len() * 4 {
                return Err(Error::LengthMismatch {
                    expected: geometry.len(),
                    actual: bytes.len() / 4,
                });
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
        "u8" => {
            if bytes.len() != geometry.len() {
                return Err(Error::LengthMismatch {
                    expected: geometry.len(),
                    actual: bytes.len(),
                });
            }
            bytes.iter().map(|&b| b as f64).collect()
        }
        other => return Err(Error::UnknownDtype(other.to_string())),
    };
    Ok(VolumeGrid { geometry, values })
}

pub fn write_volume(vol: &VolumeGrid, path: &Path, dtype: Dtype) -> Result<()> {
    let header = RawvolHeader {
        format: "rawvol".into(),
        version: 1,
        dims: vol.geometry.dims,
        spacing_mm: vol.geometry.spacing_mm,
        dtype: match dtype {
            Dtype::F32Le => "f32le".into(),
            Dtype::U8 => "u8".into(),
        },
        order: "x-fastest".into(),
    };
    let payload: Vec<u8> = match dtype {
        Dtype::F32Le => vol
            .values
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect(),
        Dtype::U8 => vol
            .values
            .iter()
            .map(|&v| v.clamp(0.0, 255.0) as u8)
            .collect(),
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let payload_file = payload_path(path);
    fs::write(&payload_file, payload).map_err(|e| Error::io(&payload_file, e))
}

pub fn read_label_mask(path: &Path) -> Result<LabelMask> {
    LabelMask::from_volume(&read_volume(path)?)
}

pub fn write_label_mask(mask: &LabelMask, path: &Path) -> Result<()> {
    write_volume(&mask.to_volume(), path, Dtype::U8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_membership_per_label() {
        let g = Geometry::new([4, 1, 1], [1.0; 3]).unwrap();
        let mask = LabelMask::new(g, vec![0, 1, 2, 4]).unwrap();
        let r = derive_regions(&mask).unwrap();
        assert_eq!(r.wt.voxels, vec![false, true, true, true]);
        assert_eq!(r.tc.voxels, vec![false, true, false, true]);
        assert_eq!(r.enc.voxels, vec![false, false, false, true]);
        assert_eq!(r.pte.voxels, vec![false, false, true, false]);
        assert_eq!(r.nec.voxels, vec![false, true, false, false]);
    }

    #[test]
    fn nesting_holds_for_every_label() {
        for l in [0u8, 1, 2, 4] {
            let g = Geometry::new([1, 1, 1], [1.0; 3]).unwrap();
            let r = derive_regions(&LabelMask::new(g, vec![l]).unwrap()).unwrap();
            assert!(r.enc.is_subset_of(&r.tc));
            assert!(r.tc.is_subset_of(&r.wt));
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let g = Geometry::new([1, 1, 1], [1.0; 3]).unwrap();
        assert!(matches!(LabelMask::new(g, vec![3]), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn roundtrip_f32_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.rawvol");
        let v = VolumeGrid::new([3, 1, 1], [1.0, 2.0, 4.0], vec![1.0, 2.0, 3.0]).unwrap();
        write_volume(&v, &p, Dtype::F32Le).unwrap();
        let back = read_volume(&p).unwrap();
        assert_eq!(back, v);
        let zeros = VolumeGrid::new([2, 2, 2], [1.0; 3], vec![0.0; 8]).unwrap();
        write_volume(&zeros, &p, Dtype::F32Le).unwrap();
        assert_eq!(read_volume(&p).unwrap(), zeros);
    }

    #[test]
    fn short_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.rawvol");
        let v = VolumeGrid::new([2, 2, 2], [1.0; 3], vec![0.0; 8]).unwrap();
        write_volume(&v, &p, Dtype::F32Le).unwrap();
        fs::write(payload_path(&p), vec![0u8; 7 * 4]).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn unknown_dtype_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.rawvol");
        fs::write(
            &p,
            r#"{"format":"rawvol","version":1,"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f64le","order":"x-fastest"}"#,
        )
        .unwrap();
        fs::write(payload_path(&p), [0u8; 8]).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::UnknownDtype(_))));
    }
}
