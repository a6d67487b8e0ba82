//! Per-patient extraction: locate, crop, conventional and radiomics features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::manifest::ManifestEntry;
use super::table::FeatureTable;
use crate::conventional::{extract_conventional, ConventionalFeatures, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::locator::{locate, LocatorResult};
use crate::radiomics::{extract_all, RadiomicsVector};
use crate::volume::{crop_to_box, load_mask, load_volume, BoundingBoxMM, Interpolation, LabelMask, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// Crop all inputs to the located head-and-neck box before extraction.
    pub crop: bool,
    pub crop_spacing_mm: f64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            crop: true,
            crop_spacing_mm: 1.0,
            workers: 0,
        }
    }
}

/// Images of one patient on a shared grid.
#[derive(Debug, Clone)]
pub struct CroppedPatient {
    pub pet: VoxelGrid,
    pub ct: VoxelGrid,
    pub mask: LabelMask,
}

/// Resamples PET and CT (linear) and the mask (nearest) over `bbox`.
pub fn crop_patient(
    pet: &VoxelGrid,
    ct: &VoxelGrid,
    mask: &LabelMask,
    bbox: &BoundingBoxMM,
    spacing_mm: f64,
) -> Result<CroppedPatient> {
    let s = [spacing_mm; 3];
    Ok(CroppedPatient {
        pet: crop_to_box(pet, bbox, s, Interpolation::Linear)?,
        ct: crop_to_box(ct, bbox, s, Interpolation::Linear)?,
        mask: crop_to_box(mask, bbox, s, Interpolation::Nearest)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientFeatures {
    pub patient_id: String,
    pub locator: Option<LocatorResult>,
    pub conventional: ConventionalFeatures,
    /// `None` when the ROI is empty or a family is undefined.
    pub radiomics: Option<RadiomicsVector>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientFailure {
    pub patient_id: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchResult {
    pub features: Vec<PatientFeatures>,
    pub failures: Vec<PatientFailure>,
}

impl BatchResult {
    pub fn conventional_table(&self) -> Result<FeatureTable> {
        let mut t = FeatureTable::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect());
        for p in &self.features {
            t.push_row(&p.patient_id, p.conventional.values().to_vec())?;
        }
        Ok(t)
    }

    /// Columns follow the first complete vector; patients without radiomics
    /// get an empty row.
    pub fn radiomics_table(&self) -> Result<FeatureTable> {
        let names: Vec<String> = self
            .features
            .iter()
            .find_map(|p| p.radiomics.as_ref())
            .map(|v| v.names().map(str::to_string).collect())
            .unwrap_or_default();
        let mut t = FeatureTable::new(names.clone());
        for p in &self.features {
            let row = names
                .iter()
                .map(|n| p.radiomics.as_ref().and_then(|v| v.get(n)))
                .collect();
            t.push_row(&p.patient_id, row)?;
        }
        Ok(t)
    }
}

/// Features for one patient from images already in memory.
pub fn extract_patient(
    patient_id: &str,
    pet: &VoxelGrid,
    ct: &VoxelGrid,
    mask: &LabelMask,
    cfg: &PipelineConfig,
) -> std::result::Result<PatientFeatures, PatientFailure> {
    let fail = |stage: &str, e: Error| PatientFailure {
        patient_id: patient_id.to_string(),
        stage: stage.to_string(),
        message: e.to_string(),
    };
    let mut warnings = Vec::new();
    let (locator, cropped) = if cfg.extract.crop {
        let loc = locate(pet, ct, None, &cfg.locator);
        let bbox = loc.bbox.ok_or_else(|| {
            fail(
                "locate",
                Error::Detection(loc.message.clone().unwrap_or_else(|| "no box".into())),
            )
        })?;
        for c in loc.checks.iter().filter(|c| !c.passed) {
            warnings.push(format!("locator check {} failed", c.name));
        }
        let c = crop_patient(pet, ct, mask, &bbox, cfg.extract.crop_spacing_mm).map_err(|e| fail("crop", e))?;
        (Some(loc), Some(c))
    } else {
        (None, None)
    };
    let (pet, ct, mask) = match &cropped {
        Some(c) => (&c.pet, &c.ct, &c.mask),
        None => (pet, ct, mask),
    };
    let conventional = extract_conventional(pet, mask, &cfg.conventional).map_err(|e| fail("conventional", e))?;
    if conventional.missing_gtvp {
        warnings.push("mask has no primary tumour".into());
    }
    let radiomics = match extract_all(pet, ct, mask, &cfg.radiomics) {
        Ok(v) => {
            warnings.extend(v.flags.iter().cloned());
            Some(v)
        }
        Err(e @ (Error::EmptyRoi(_) | Error::Undefined(_))) => {
            warnings.push(format!("radiomics: {e}"));
            None
        }
        Err(e) => return Err(fail("radiomics", e)),
    };
    Ok(PatientFeatures {
        patient_id: patient_id.to_string(),
        locator,
        conventional,
        radiomics,
        warnings,
    })
}

fn extract_entry(entry: &ManifestEntry, cfg: &PipelineConfig) -> std::result::Result<PatientFeatures, PatientFailure> {
    let fail = |e: Error| PatientFailure {
        patient_id: entry.patient_id.clone(),
        stage: "load".into(),
        message: e.to_string(),
    };
    let pet = load_volume(&entry.pet).map_err(fail)?;
    let ct = load_volume(&entry.ct).map_err(fail)?;
    let mask = load_mask(&entry.mask).map_err(fail)?;
    extract_patient(&entry.patient_id, &pet, &ct, &mask, cfg)
}

/// Extracts every manifest entry on a bounded pool. Failures are collected,
/// not raised; output order follows the manifest.
pub fn batch_extract(entries: &[ManifestEntry], cfg: &PipelineConfig) -> Result<BatchResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.extract.workers)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| entries.par_iter().map(|e| extract_entry(e, cfg)).collect());
    let mut out = BatchResult::default();
    for r in results {
        match r {
            Ok(f) => out.features.push(f),
            Err(f) => {
                log::warn!("{}: {} failed: {}", f.patient_id, f.stage, f.message);
                out.failures.push(f);
            }
        }
    }
    Ok(out)
}
