//! Batch extraction, model fitting and the `hnrad` binary end to end.

use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hn_radiomics::pipeline::{
    batch_extract, run_model, write_clinical, Cohort, ManifestEntry, PatientManifest, PipelineConfig, Recipe,
};
use hn_radiomics::synthetic::{head_neck_phantom, synthetic_cohort, CohortSpec, PhantomSpec};
use hn_radiomics::volume::{save_mask, save_volume};

/// Writes `n` phantoms into `dir` and returns their manifest.
fn phantom_manifest(dir: &Path, n: usize) -> PatientManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut manifest = PatientManifest::default();
    for k in 0..n {
        let id = format!("P{k}");
        let ph = head_neck_phantom(&PhantomSpec::randomized(&mut rng, 4)).unwrap();
        let path = |s: &str| dir.join(format!("{id}_{s}.nii.gz"));
        save_volume(&ph.pet, path("pet")).unwrap();
        save_volume(&ph.ct, path("ct")).unwrap();
        save_mask(&ph.mask, path("mask")).unwrap();
        manifest.entries.push(ManifestEntry {
            patient_id: id.clone(),
            center: "DEMO".into(),
            pet: path("pet"),
            ct: path("ct"),
            mask: path("mask"),
            truth: Some(path("mask")),
            clinical: None,
        });
    }
    manifest
}

#[test]
fn batch_extraction_isolates_failures_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = phantom_manifest(dir.path(), 3);
    let mut cfg = PipelineConfig::default();
    cfg.extract.workers = 3;

    let good = batch_extract(&manifest.entries, &cfg).unwrap();
    assert_eq!(good.features.len(), 3);
    assert!(good.failures.is_empty());
    let conv = good.conventional_table().unwrap();
    assert!(conv.values.iter().flatten().all(Option::is_some));
    let rad = good.radiomics_table().unwrap();
    assert!(rad.names.len() > 200);
    assert!(rad.values.iter().flatten().flatten().all(|v| v.is_finite()));

    cfg.extract.workers = 1;
    let again = batch_extract(&manifest.entries, &cfg).unwrap();
    assert_eq!(again.conventional_table().unwrap(), conv);
    assert_eq!(again.radiomics_table().unwrap(), rad);

    std::fs::write(&manifest.entries[1].pet, b"not an image").unwrap();
    let partial = batch_extract(&manifest.entries, &cfg).unwrap();
    assert_eq!(partial.features.len(), 2);
    assert_eq!(partial.failures.len(), 1);
    assert_eq!(partial.failures[0].patient_id, "P1");
}

#[test]
fn training_skips_patients_without_outcome() {
    let data = synthetic_cohort(&CohortSpec::with_patients(200)).unwrap();
    let mut clinical = data.clinical.clone();
    for c in clinical.iter_mut().step_by(10) {
        c.survival = None;
    }
    let cohort = Cohort::new(&clinical, &data.features).unwrap();
    let cfg = PipelineConfig::default();
    for recipe in [Recipe::Conventional, Recipe::RadiomicsCombat, Recipe::Combined] {
        let run = run_model(recipe, &cohort, None, &cfg).unwrap();
        assert_eq!(run.trained.training_patients, 180, "{}", recipe.name());
        assert!(run.trained.selection.is_nested());
        assert!(run.train_risks.iter().all(|(_, r)| r.is_finite()));
    }
}

fn hnrad(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_hnrad"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run hnrad");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.status.success(), "hnrad {args:?} failed:\n{text}");
    text
}

#[test]
fn cli_fit_predict_evaluate_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = synthetic_cohort(&CohortSpec::with_patients(300)).unwrap();
    let (train, test) = data.split_every(5);
    let pick = |ids: &[String]| {
        data.clinical
            .iter()
            .filter(|c| ids.contains(&c.patient_id))
            .cloned()
            .collect::<Vec<_>>()
    };
    let test_clinical = pick(&test);
    write_clinical(&d.join("train_clinical.csv"), &pick(&train)).unwrap();
    write_clinical(&d.join("test_clinical.csv"), &test_clinical).unwrap();
    let blind: Vec<_> = test_clinical
        .iter()
        .cloned()
        .map(|mut c| {
            c.survival = None;
            c
        })
        .collect();
    write_clinical(&d.join("test_blind.csv"), &blind).unwrap();
    data.features
        .rows_for(&train)
        .unwrap()
        .write_csv(&d.join("train.csv"), None)
        .unwrap();
    data.features
        .rows_for(&test)
        .unwrap()
        .write_csv(&d.join("test.csv"), None)
        .unwrap();

    let defaults = hnrad(d, &["default-config"]);
    assert!(toml::from_str::<toml::Table>(&defaults).is_ok());

    std::fs::write(
        d.join("hnrad.toml"),
        r#"seed = 7

[args.fit]
recipe = "radiomics-combat"
features = ["train.csv"]
clinical = "train_clinical.csv"
test_features = ["test.csv"]
test_clinical = "test_blind.csv"
out_model = "model.json"
"#,
    )
    .unwrap();
    hnrad(d, &["--config", "hnrad.toml", "fit", "--out-risks", "train_risks.csv"]);
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["meta"]["seed"], 7);

    hnrad(
        d,
        &[
            "predict",
            "--model",
            "model.json",
            "--features",
            "test.csv",
            "--clinical",
            "test_blind.csv",
            "--out",
            "test_risks.csv",
        ],
    );
    let report = hnrad(
        d,
        &[
            "evaluate-prognosis",
            "--risks",
            "test_risks.csv",
            "--clinical",
            "test_clinical.csv",
        ],
    );
    let c: f64 = report.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(c > 0.7, "{report}");
}

#[test]
fn cli_evaluates_segmentation_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, truth) = (dir.path().join("pred"), dir.path().join("truth"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&truth).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..2 {
        let ph = head_neck_phantom(&PhantomSpec::randomized(&mut rng, 2)).unwrap();
        save_mask(&ph.mask, pred.join(format!("case{k}.nii.gz"))).unwrap();
        save_mask(&ph.mask, truth.join(format!("case{k}.nii.gz"))).unwrap();
    }
    hnrad(
        dir.path(),
        &[
            "evaluate-seg",
            "--pred-dir",
            "pred",
            "--truth-dir",
            "truth",
            "--out",
            "dice.json",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dice.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["aggregated"], serde_json::json!([1.0, 1.0]));
    assert_eq!(report["report"]["per_case"].as_array().unwrap().len(), 2);
}
