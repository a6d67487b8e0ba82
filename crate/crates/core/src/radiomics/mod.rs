//! IBSI-style radiomics on the GTVp ∪ GTVn region.
//!
//! Each modality is resampled to isotropic voxels, the union mask is
//! nearest-resampled, intensities inside the ROI are discretised with a fixed
//! bin number, and every feature family is computed on that single region.
//! Feature names follow `<modality>-<family>-<feature>`.

mod discretize;
mod glcm;
mod glrlm;
mod intensity;
mod morphology;
mod ngldm;
mod ngtdm;
mod zones;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{labels, resample, GridGeometry, Interpolation, LabelMask, VoxelGrid};

pub use discretize::{discretize_fbn, DiscretizedRoi};
pub use glcm::{glcm_features, glcm_features_from_matrix, glcm_matrices, GLCM_DIRECTIONS};
pub use glrlm::{glrlm_features, glrlm_matrices, run_length_features};
pub use intensity::{
    histogram_features, intensity_features, local_intensity_peak, local_intensity_peaks, nearest_rank_percentile,
    statistics_features,
};
pub use morphology::{marching_cubes_mesh, morphology_features, Mesh, Morphology};
pub use ngldm::{ngldm_features, ngldm_features_from_matrix, ngldm_matrix};
pub use ngtdm::{ngtdm_features, ngtdm_features_from_table, ngtdm_table, NgtdmTable};
pub use zones::{distance_map, gldzm_features, gldzm_matrix, glszm_features, glszm_matrix, zone_features, ZoneMatrix};

/// Named feature values from one family, plus degenerate-case flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSet {
    pub values: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

impl FeatureSet {
    pub(crate) fn push(&mut self, name: &str, value: f64) {
        self.values.push((name.to_string(), value));
    }

    pub(crate) fn flag(&mut self, flag: impl Into<String>) {
        let flag = flag.into();
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(|(n, _)| n.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "PET")]
    Pet,
    #[serde(rename = "CT")]
    Ct,
}

impl Modality {
    pub fn prefix(self) -> &'static str {
        match self {
            Modality::Pet => "PET",
            Modality::Ct => "CT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadiomicsConfig {
    pub n_bins: u16,
    pub spacing_mm: f64,
}

impl Default for RadiomicsConfig {
    fn default() -> Self {
        Self {
            n_bins: 64,
            spacing_mm: 2.0,
        }
    }
}

/// Image and union ROI on the isotropic radiomics grid.
#[derive(Debug, Clone)]
pub struct PreparedRoi {
    pub image: VoxelGrid,
    /// Membership over `image`'s grid.
    pub inside: Vec<bool>,
}

impl PreparedRoi {
    pub fn geometry(&self) -> &GridGeometry {
        self.image.geometry()
    }

    pub fn roi_values(&self) -> Vec<f64> {
        self.image
            .values()
            .iter()
            .zip(&self.inside)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| f64::from(v))
            .collect()
    }

    pub fn voxel_count(&self) -> usize {
        self.inside.iter().filter(|&&m| m).count()
    }
}

/// Resamples image (linear) and mask (nearest) to `spacing_mm` isotropic and
/// takes labels {1, 2} as the ROI.
pub fn prepare_roi(image: &VoxelGrid, mask: &LabelMask, spacing_mm: f64) -> Result<PreparedRoi> {
    image.geometry().require_same(mask.geometry(), "image vs mask")?;
    let spacing = [spacing_mm; 3];
    let image = resample(image, spacing, Interpolation::Linear)?;
    let mask = resample(mask, spacing, Interpolation::Nearest)?;
    let inside: Vec<bool> = mask
        .labels()
        .iter()
        .map(|&l| l == labels::GTVP || l == labels::GTVN)
        .collect();
    if !inside.iter().any(|&m| m) {
        return Err(Error::EmptyRoi(format!(
            "roi vanishes after resampling to {spacing_mm} mm"
        )));
    }
    Ok(PreparedRoi { image, inside })
}

/// Ordered named radiomics features for one patient.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RadiomicsVector {
    pub features: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

impl RadiomicsVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn absorb(&mut self, modality: Modality, family: &str, set: FeatureSet) {
        let prefix = format!("{}-{}-", modality.prefix(), family);
        for (name, value) in set.values {
            self.features.push((format!("{prefix}{name}"), value));
        }
        for flag in set.flags {
            self.flags.push(format!("{prefix}{flag}"));
        }
    }
}

/// Features reported by the combined and harmonised radiomics models.
pub const KEY_FEATURES: [&str; 9] = [
    "CT-Morphology-spherical disproportion",
    "CT-Local-peak",
    "CT-IH-qcod",
    "PET-Statistic-skewness",
    "CT-GLSZM-szhge",
    "PET-GLDZM-zdnu",
    "PET-NGTDM-coarseness",
    "PET-NGLDM-lgce",
    "PET-GLCM-correlation1",
];

/// All families for one modality on a prepared ROI.
pub fn extract_modality(prepared: &PreparedRoi, modality: Modality, n_bins: u16) -> Result<RadiomicsVector> {
    let mut out = RadiomicsVector::default();
    let geometry = prepared.geometry();

    out.absorb(
        modality,
        "Morphology",
        morphology_features(geometry, &prepared.inside)?.into_feature_set(),
    );

    let values = prepared.roi_values();
    let disc = DiscretizedRoi::from_prepared(prepared, n_bins)?;
    let (stats, hist) = intensity_features(&values, &disc.roi_levels());
    out.absorb(modality, "Statistic", stats);
    out.absorb(modality, "IH", hist);

    let (local, global) = local_intensity_peaks(&prepared.image, &prepared.inside)?;
    let mut li = FeatureSet::default();
    li.push("peak", local);
    li.push("globalpeak", global);
    out.absorb(modality, "Local", li);

    if disc.voxel_count() >= 2 {
        out.absorb(modality, "GLCM", glcm_features(&disc)?);
        out.absorb(modality, "GLRLM", glrlm_features(&disc)?);
    } else {
        return Err(Error::EmptyRoi(
            "co-occurrence features need at least 2 roi voxels".into(),
        ));
    }
    out.absorb(modality, "GLSZM", glszm_features(&disc));
    out.absorb(modality, "GLDZM", gldzm_features(&disc));
    out.absorb(modality, "NGTDM", ngtdm_features(&disc));
    out.absorb(modality, "NGLDM", ngldm_features(&disc));

    if let Some((name, _)) = out.features.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Undefined(format!("feature {name} is not finite")));
    }
    Ok(out)
}

/// PET and CT radiomics from the shared predicted mask.
pub fn extract_all(
    pet: &VoxelGrid,
    ct: &VoxelGrid,
    mask: &LabelMask,
    config: &RadiomicsConfig,
) -> Result<RadiomicsVector> {
    let mut out = RadiomicsVector::default();
    for (modality, image) in [(Modality::Pet, pet), (Modality::Ct, ct)] {
        let prepared = prepare_roi(image, mask, config.spacing_mm)?;
        let v = extract_modality(&prepared, modality, config.n_bins)?;
        out.features.extend(v.features);
        out.flags.extend(v.flags);
    }
    Ok(out)
}
