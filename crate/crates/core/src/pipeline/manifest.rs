use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::ClinicalRecord;
use crate::error::{Error, Result};

/// Image paths for one patient, plus clinical data when joined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub center: String,
    pub pet: PathBuf,
    pub ct: PathBuf,
    /// Predicted segmentation.
    pub mask: PathBuf,
    pub truth: Option<PathBuf>,
    pub clinical: Option<ClinicalRecord>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PatientManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct Row {
    patient_id: String,
    center: String,
    pet: PathBuf,
    ct: PathBuf,
    mask: PathBuf,
    #[serde(default)]
    truth: Option<PathBuf>,
}

impl PatientManifest {
    /// Reads `patient_id, center, pet, ct, mask[, truth]`; relative paths are
    /// taken relative to the manifest's directory.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Schema(format!("{other:?}")),
        })?;
        let mut entries = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            let abs = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
            entries.push(ManifestEntry {
                patient_id: row.patient_id,
                center: row.center,
                pet: abs(row.pet),
                ct: abs(row.ct),
                mask: abs(row.mask),
                truth: row.truth.filter(|p| !p.as_os_str().is_empty()).map(abs),
                clinical: None,
            });
        }
        let m = Self { entries };
        m.check_unique()?;
        Ok(m)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Schema(e.to_string()))?;
        w.write_record(["patient_id", "center", "pet", "ct", "mask", "truth"])?;
        for e in &self.entries {
            let s = |p: &Path| p.to_string_lossy().into_owned();
            w.write_record([
                e.patient_id.clone(),
                e.center.clone(),
                s(&e.pet),
                s(&e.ct),
                s(&e.mask),
                e.truth.as_deref().map(s).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.patient_id) {
                return Err(Error::Schema(format!("duplicate patient {}", e.patient_id)));
            }
        }
        Ok(())
    }

    /// Every referenced image file exists.
    pub fn check_files(&self) -> Result<()> {
        for e in &self.entries {
            for p in [&e.pet, &e.ct, &e.mask].into_iter().chain(e.truth.as_ref()) {
                if !p.exists() {
                    return Err(Error::Schema(format!(
                        "{}: {} does not exist",
                        e.patient_id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Attaches clinical rows by patient id.
    pub fn attach_clinical(&mut self, clinical: &[ClinicalRecord]) {
        for e in &mut self.entries {
            e.clinical = clinical.iter().find(|c| c.patient_id == e.patient_id).cloned();
        }
    }
}
