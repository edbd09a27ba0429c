//! Structured feature identifiers and the full descriptor space.
//!
//! Canonical form: `region:channel:filter:family:name`, e.g.
//! `WT:T1Gd:wavelet-LLH:glcm:JointEntropy`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::TumorRegion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    WT,
    TC,
    ENC,
    Brain,
    None,
}

impl Region {
    pub fn token(self) -> &'static str {
        match self {
            Region::WT => "WT",
            Region::TC => "TC",
            Region::ENC => "ENC",
            Region::Brain => "BRAIN",
            Region::None => "NONE",
        }
    }

    pub fn tumor(self) -> Option<TumorRegion> {
        match self {
            Region::WT => Some(TumorRegion::WT),
            Region::TC => Some(TumorRegion::TC),
            Region::ENC => Some(TumorRegion::ENC),
            _ => None,
        }
    }
}

impl From<TumorRegion> for Region {
    fn from(r: TumorRegion) -> Self {
        match r {
            TumorRegion::WT => Region::WT,
            TumorRegion::TC => Region::TC,
            TumorRegion::ENC => Region::ENC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    T1,
    T1Gd,
    T2,
    Flair,
    None,
}

impl Channel {
    pub const IMAGING: [Channel; 4] = [Channel::T1, Channel::T1Gd, Channel::T2, Channel::Flair];

    pub fn token(self) -> &'static str {
        match self {
            Channel::T1 => "T1",
            Channel::T1Gd => "T1Gd",
            Channel::T2 => "T2",
            Channel::Flair => "FLAIR",
            Channel::None => "NONE",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "T1" => Channel::T1,
            "T1Gd" => Channel::T1Gd,
            "T2" => Channel::T2,
            "FLAIR" => Channel::Flair,
            "NONE" => Channel::None,
            _ => return Err(Error::parse("channel", format!("unknown channel {s:?}"))),
        })
    }
}

/// Image channel a first-order or texture feature is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Original,
    /// Band code as three bits, bit `a` set when axis `a` (x, y, z) is high-pass.
    Wavelet(u8),
    /// Laplacian of Gaussian, sigma stored in micrometres.
    Log { sigma_um: u32 },
    None,
}

impl FilterKind {
    pub fn log_mm(sigma_mm: f64) -> FilterKind {
        FilterKind::Log {
            sigma_um: (sigma_mm * 1000.0).round() as u32,
        }
    }

    pub fn sigma_mm(self) -> Option<f64> {
        match self {
            FilterKind::Log { sigma_um } => Some(sigma_um as f64 / 1000.0),
            _ => None,
        }
    }

    pub fn band_code(bits: u8) -> String {
        (0..3)
            .map(|a| if bits >> a & 1 == 1 { 'H' } else { 'L' })
            .collect()
    }

    /// Original, the 8 wavelet bands (LLL..HHH) and LoG at 1 and 3 mm.
    pub fn default_set() -> Vec<FilterKind> {
        let mut v = vec![FilterKind::Original];
        v.extend(WAVELET_ORDER.iter().map(|&b| FilterKind::Wavelet(b)));
        v.push(FilterKind::log_mm(1.0));
        v.push(FilterKind::log_mm(3.0));
        v
    }

    pub fn token(self) -> String {
        match self {
            FilterKind::Original => "original".into(),
            FilterKind::Wavelet(bits) => format!("wavelet-{}", Self::band_code(bits)),
            FilterKind::Log { sigma_um } => {
                let mm = sigma_um as f64 / 1000.0;
                format!("log-sigma-{mm}")
            }
            FilterKind::None => "NONE".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "original" {
            return Ok(FilterKind::Original);
        }
        if s == "NONE" {
            return Ok(FilterKind::None);
        }
        if let Some(code) = s.strip_prefix("wavelet-") {
            let b = code.as_bytes();
            if b.len() == 3 && b.iter().all(|c| *c == b'L' || *c == b'H') {
                let bits = (0..3).fold(0u8, |acc, a| acc | (((b[a] == b'H') as u8) << a));
                return Ok(FilterKind::Wavelet(bits));
            }
        }
        if let Some(sig) = s.strip_prefix("log-sigma-") {
            if let Ok(v) = sig.parse::<f64>() {
                if v > 0.0 {
                    let k = FilterKind::log_mm(v);
                    if k.token() == s {
                        return Ok(k);
                    }
                }
            }
        }
        Err(Error::parse("filter", format!("unknown filter {s:?}")))
    }
}

/// Wavelet band enumeration order: LLL, LLH, LHL, LHH, HLL, HLH, HHL, HHH
/// (first letter is the x axis).
impl serde::Serialize for FilterKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> serde::Deserialize<'de> for FilterKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        FilterKind::parse(&s).map_err(serde::de::Error::custom)
    }
}

pub const WAVELET_ORDER: [u8; 8] = [0b000, 0b100, 0b010, 0b110, 0b001, 0b101, 0b011, 0b111];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    FirstOrder,
    Shape,
    Glcm,
    Glrlm,
    Glszm,
    Gldm,
    Ngtdm,
    Clinical,
}

impl Family {
    pub const TEXTURE: [Family; 5] = [
        Family::Glcm,
        Family::Glrlm,
        Family::Glszm,
        Family::Gldm,
        Family::Ngtdm,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Family::FirstOrder => "firstorder",
            Family::Shape => "shape",
            Family::Glcm => "glcm",
            Family::Glrlm => "glrlm",
            Family::Glszm => "glszm",
            Family::Gldm => "gldm",
            Family::Ngtdm => "ngtdm",
            Family::Clinical => "clinical",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "firstorder" => Family::FirstOrder,
            "shape" => Family::Shape,
            "glcm" => Family::Glcm,
            "glrlm" => Family::Glrlm,
            "glszm" => Family::Glszm,
            "gldm" => Family::Gldm,
            "ngtdm" => Family::Ngtdm,
            "clinical" => Family::Clinical,
            _ => return Err(Error::parse("family", format!("unknown family {s:?}"))),
        })
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            Family::FirstOrder => FIRST_ORDER_NAMES,
            Family::Shape => SHAPE_NAMES,
            Family::Glcm => GLCM_NAMES,
            Family::Glrlm => GLRLM_NAMES,
            Family::Glszm => GLSZM_NAMES,
            Family::Gldm => GLDM_NAMES,
            Family::Ngtdm => NGTDM_NAMES,
            Family::Clinical => CLINICAL_NAMES,
        }
    }
}

pub const FIRST_ORDER_NAMES: &[&str] = &[
    "Energy",
    "Entropy",
    "Minimum",
    "Maximum",
    "10Percentile",
    "90Percentile",
    "Mean",
    "Median",
    "InterquartileRange",
    "Range",
    "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation",
    "RootMeanSquared",
    "Skewness",
    "Kurtosis",
    "Variance",
    "Uniformity",
];

pub const SHAPE_NAMES: &[&str] = &[
    "MeshVolume",
    "SurfaceArea",
    "SurfaceVolumeRatio",
    "Sphericity",
    "Maximum3DDiameter",
    "Maximum2DDiameterSlice",
    "Maximum2DDiameterColumn",
    "Maximum2DDiameterRow",
    "MajorAxisLength",
    "MinorAxisLength",
    "LeastAxisLength",
    "Elongation",
    "Flatness",
];

pub const BRAIN_SHAPE_NAMES: &[&str] = &["MeshVolume", "SurfaceArea"];

pub const GLCM_NAMES: &[&str] = &[
    "Autocorrelation",
    "JointAverage",
    "ClusterProminence",
    "ClusterShade",
    "ClusterTendency",
    "Contrast",
    "Correlation",
    "DifferenceAverage",
    "DifferenceEntropy",
    "DifferenceVariance",
    "JointEnergy",
    "JointEntropy",
    "Imc1",
    "Imc2",
    "MCC",
    "Idmn",
    "Idn",
    "InverseVariance",
    "MaximumProbability",
    "SumEntropy",
    "SumSquares",
];

pub const GLRLM_NAMES: &[&str] = &[
    "ShortRunEmphasis",
    "LongRunEmphasis",
    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformityNormalized",
    "RunPercentage",
    "GrayLevelVariance",
    "RunVariance",
    "RunEntropy",
    "LowGrayLevelRunEmphasis",
    "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis",
    "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis",
    "LongRunHighGrayLevelEmphasis",
];

pub const GLSZM_NAMES: &[&str] = &[
    "SmallAreaEmphasis",
    "LargeAreaEmphasis",
    "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformityNormalized",
    "ZonePercentage",
    "GrayLevelVariance",
    "ZoneVariance",
    "ZoneEntropy",
    "LowGrayLevelZoneEmphasis",
    "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis",
    "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis",
    "LargeAreaHighGrayLevelEmphasis",
];

pub const GLDM_NAMES: &[&str] = &[
    "SmallDependenceEmphasis",
    "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",
    "DependenceNonUniformityNormalized",
    "GrayLevelVariance",
    "DependenceVariance",
    "DependenceEntropy",
    "LowGrayLevelEmphasis",
    "HighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis",
    "SmallDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis",
    "LargeDependenceHighGrayLevelEmphasis",
];

pub const NGTDM_NAMES: &[&str] = &["Coarseness", "Contrast", "Busyness", "Complexity", "Strength"];

pub const CLINICAL_NAMES: &[&str] = &["Age"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureDescriptor {
    pub region: Region,
    pub channel: Channel,
    pub filter: FilterKind,
    pub family: Family,
    pub name: String,
}

impl FeatureDescriptor {
    pub fn shape(region: Region, name: &str) -> Self {
        FeatureDescriptor {
            region,
            channel: Channel::None,
            filter: FilterKind::None,
            family: Family::Shape,
            name: name.to_string(),
        }
    }

    pub fn age() -> Self {
        FeatureDescriptor {
            region: Region::None,
            channel: Channel::None,
            filter: FilterKind::None,
            family: Family::Clinical,
            name: "Age".into(),
        }
    }

    pub fn intensity(region: Region, channel: Channel, filter: FilterKind, family: Family, name: &str) -> Self {
        FeatureDescriptor {
            region,
            channel,
            filter,
            family,
            name: name.to_string(),
        }
    }

    /// Features that do not depend on the tumor segmentation (brain shape, age).
    pub fn is_segmentation_independent(&self) -> bool {
        matches!(self.region, Region::Brain | Region::None)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::parse("descriptor", format!("{self}: {m}")));
        match self.family {
            Family::Shape => {
                if self.channel != Channel::None || self.filter != FilterKind::None {
                    return bad("shape features carry no channel or filter");
                }
                match self.region {
                    Region::Brain if BRAIN_SHAPE_NAMES.contains(&self.name.as_str()) => {}
                    Region::WT | Region::TC | Region::ENC => {}
                    _ => return bad("invalid region for shape feature"),
                }
            }
            Family::Clinical => {
                if self.region != Region::None || self.channel != Channel::None || self.filter != FilterKind::None {
                    return bad("clinical features carry no region, channel or filter");
                }
            }
            _ => {
                if self.region.tumor().is_none() || self.channel == Channel::None || self.filter == FilterKind::None {
                    return bad("intensity features need a tumor region, channel and filter");
                }
            }
        }
        if !self.family.names().contains(&self.name.as_str()) {
            return bad("unknown feature name for family");
        }
        Ok(())
    }
}

impl serde::Serialize for FeatureDescriptor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for FeatureDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}:{}",
            self.region.token(),
            self.channel.token(),
            self.filter.token(),
            self.family.token(),
            self.name
        )
    }
}

impl FromStr for FeatureDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 5 {
            return Err(Error::parse("descriptor", format!("expected 5 fields in {s:?}")));
        }
        let region = match parts[0] {
            "WT" => Region::WT,
            "TC" => Region::TC,
            "ENC" => Region::ENC,
            "BRAIN" => Region::Brain,
            "NONE" => Region::None,
            other => return Err(Error::parse("descriptor", format!("unknown region {other:?}"))),
        };
        let d = FeatureDescriptor {
            region,
            channel: Channel::parse(parts[1])?,
            filter: FilterKind::parse(parts[2])?,
            family: Family::parse(parts[3])?,
            name: parts[4].to_string(),
        };
        d.validate()?;
        Ok(d)
    }
}

/// The full descriptor space in canonical order: region shape, brain shape,
/// then first-order and texture features per (region, channel, filter), then
/// optionally Age.
pub fn enumerate_descriptors(include_age: bool) -> Vec<FeatureDescriptor> {
    enumerate_with_filters(&FilterKind::default_set(), include_age)
}

pub fn enumerate_with_filters(filters: &[FilterKind], include_age: bool) -> Vec<FeatureDescriptor> {
    let mut out = Vec::new();
    for region in TumorRegion::ALL {
        for name in SHAPE_NAMES {
            out.push(FeatureDescriptor::shape(region.into(), name));
        }
    }
    for name in BRAIN_SHAPE_NAMES {
        out.push(FeatureDescriptor::shape(Region::Brain, name));
    }
    for region in TumorRegion::ALL {
        for channel in Channel::IMAGING {
            for &filter in filters {
                out.extend(intensity_block(region.into(), channel, filter));
            }
        }
    }
    if include_age {
        out.push(FeatureDescriptor::age());
    }
    out
}

/// The 84 first-order and texture descriptors of one (region, channel, filter).
pub fn intensity_block(region: Region, channel: Channel, filter: FilterKind) -> Vec<FeatureDescriptor> {
    let mut out = Vec::with_capacity(84);
    for family in std::iter::once(Family::FirstOrder).chain(Family::TEXTURE) {
        for name in family.names() {
            out.push(FeatureDescriptor::intensity(region, channel, filter, family, name));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_the_feature_arithmetic() {
        assert_eq!(enumerate_descriptors(false).len(), 11_129);
        assert_eq!(enumerate_descriptors(true).len(), 11_130);
        assert_eq!(13 * 3 + 2 + 84 * 4 * 11 * 3, 11_129);
        assert_eq!(intensity_block(Region::WT, Channel::T1, FilterKind::Original).len(), 84);
    }

    #[test]
    fn every_descriptor_roundtrips() {
        let all = enumerate_descriptors(true);
        for d in &all {
            let s = d.to_string();
            assert_eq!(&s.parse::<FeatureDescriptor>().unwrap(), d, "{s}");
        }
        let unique: std::collections::HashSet<String> = all.iter().map(|d| d.to_string()).collect();
        assert_eq!(unique.len(), all.len());
    }

    #[test]
    fn filter_tokens() {
        let toks: Vec<String> = FilterKind::default_set().iter().map(|f| f.token()).collect();
        assert_eq!(toks[0], "original");
        assert_eq!(toks[1], "wavelet-LLL");
        assert_eq!(toks[8], "wavelet-HHH");
        assert_eq!(toks[9], "log-sigma-1");
        assert_eq!(toks[10], "log-sigma-3");
    }

    #[test]
    fn invalid_descriptors_rejected() {
        assert!("WT:T1:original:shape:MeshVolume".parse::<FeatureDescriptor>().is_err());
        assert!("WT:NONE:NONE:clinical:Age".parse::<FeatureDescriptor>().is_err());
        assert!("WT:T1:original:glcm:Nope".parse::<FeatureDescriptor>().is_err());
        assert!("BRAIN:NONE:NONE:shape:Sphericity".parse::<FeatureDescriptor>().is_err());
        assert!("WT:T1:wavelet-LXL:glcm:Contrast".parse::<FeatureDescriptor>().is_err());
    }
}
