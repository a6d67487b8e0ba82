//! File-level pipeline: tables, manifests, folds, configuration, extraction
//! and the prognostic recipes.

pub mod config;
pub mod extract;
pub mod folds;
pub mod manifest;
pub mod model;
pub mod table;

pub use config::{PipelineConfig, DEFAULT_SEED};
pub use extract::{
    batch_extract, crop_patient, extract_patient, BatchResult, CroppedPatient, ExtractConfig, PatientFailure,
    PatientFeatures,
};
pub use folds::{assign_folds, FoldAssignment, FoldConfig};
pub use manifest::{ManifestEntry, PatientManifest};
pub use model::{
    conventional_names, cross_validate, mean_cindex, radiomics_names, run_model, Cohort, MissingPolicy, ModelConfig,
    ModelRun, Recipe, TrainedModel,
};
pub use table::{
    read_clinical, read_risks, write_clinical, write_risks, ArtifactMeta, ClinicalRecord, FeatureTable,
    CLINICAL_COLUMNS,
};
