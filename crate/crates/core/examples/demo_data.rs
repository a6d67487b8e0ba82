//! Writes a small demo workspace for the `hnrad` CLI: phantom NIfTI images
//! with a manifest, plus a synthetic feature cohort with clinical tables.
//!
//!     cargo run --release --example demo_data -- /tmp/hn-demo

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hn_radiomics::combat::Covariates;
use hn_radiomics::pipeline::{write_clinical, ClinicalRecord, ManifestEntry, PatientManifest};
use hn_radiomics::synthetic::{head_neck_phantom, synthetic_cohort, CohortSpec, PhantomSpec};
use hn_radiomics::volume::{save_mask, save_volume};

fn main() -> hn_radiomics::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "hn-demo".into()));
    let images = dir.join("images");
    std::fs::create_dir_all(&images).expect("create output directory");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut manifest = PatientManifest::default();
    let mut clinical = Vec::new();
    for k in 0..3 {
        let id = format!("P{k:02}");
        let ph = head_neck_phantom(&PhantomSpec::randomized(&mut rng, 5))?;
        let path = |s: &str| images.join(format!("{id}_{s}.nii.gz"));
        save_volume(&ph.pet, path("pet"))?;
        save_volume(&ph.ct, path("ct"))?;
        // the ground truth doubles as the "predicted" mask here
        save_mask(&ph.mask, path("mask"))?;
        manifest.entries.push(ManifestEntry {
            patient_id: id.clone(),
            center: "DEMO".into(),
            pet: path("pet"),
            ct: path("ct"),
            mask: path("mask"),
            truth: Some(path("mask")),
            clinical: None,
        });
        clinical.push(ClinicalRecord {
            patient_id: id,
            center: "DEMO".into(),
            covariates: Covariates {
                gender: 1,
                age: 60.0 + k as f64,
                weight: 75.0,
            },
            survival: None,
        });
    }
    manifest.write_csv(&dir.join("manifest.csv"))?;
    write_clinical(&dir.join("images_clinical.csv"), &clinical)?;

    let cohort = synthetic_cohort(&CohortSpec::with_patients(500))?;
    let (train, test) = cohort.split_every(5);
    let pick = |ids: &[String]| -> Vec<ClinicalRecord> {
        cohort
            .clinical
            .iter()
            .filter(|c| ids.contains(&c.patient_id))
            .cloned()
            .collect()
    };
    write_clinical(&dir.join("train_clinical.csv"), &pick(&train))?;
    write_clinical(&dir.join("test_clinical.csv"), &pick(&test))?;
    cohort
        .features
        .rows_for(&train)?
        .write_csv(&dir.join("train_features.csv"), None)?;
    cohort
        .features
        .rows_for(&test)?
        .write_csv(&dir.join("test_features.csv"), None)?;
    println!("wrote {}", dir.display());
    Ok(())
}
