use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldConfig {
    /// Centre whose patients form the held-out fold.
    pub holdout_center: String,
    pub holdout_size: usize,
    /// Folds for the remaining patients.
    pub n_folds: usize,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self {
            holdout_center: "MDA".into(),
            holdout_size: 97,
            n_folds: 4,
        }
    }
}

/// Fold per patient: `1..=n_folds` for the shuffled remainder, `n_folds + 1`
/// for the centre hold-out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub seed: u64,
    pub folds: Vec<(String, u8)>,
}

impl FoldAssignment {
    pub fn fold_of(&self, patient_id: &str) -> Option<u8> {
        self.folds.iter().find(|(p, _)| p == patient_id).map(|&(_, f)| f)
    }

    pub fn n_folds(&self) -> u8 {
        self.folds.iter().map(|&(_, f)| f).max().unwrap_or(0)
    }

    /// Patient count per fold, fold 1 first.
    pub fn sizes(&self) -> Vec<usize> {
        (1..=self.n_folds())
            .map(|f| self.folds.iter().filter(|&&(_, g)| g == f).count())
            .collect()
    }

    pub fn members(&self, fold: u8) -> Vec<String> {
        self.folds
            .iter()
            .filter(|&&(_, f)| f == fold)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Schema(e.to_string()))?;
        w.write_record(["patient_id", "fold"])?;
        for (p, f) in &self.folds {
            w.write_record([p.clone(), f.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Schema(e.to_string()))?;
        let folds = rdr
            .deserialize::<(String, u8)>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { seed, folds })
    }
}

/// Seeded split of `(patient_id, center)` pairs: `holdout_size` random
/// patients of the hold-out centre form the last fold and the rest are dealt
/// into `n_folds` folds whose sizes differ by at most one.
pub fn assign_folds(patients: &[(String, String)], seed: u64, cfg: &FoldConfig) -> Result<FoldAssignment> {
    if cfg.n_folds == 0 || cfg.n_folds > 254 {
        return Err(Error::Invalid(format!(
            "n_folds must be in 1..=254, got {}",
            cfg.n_folds
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holdout: Vec<usize> = (0..patients.len())
        .filter(|&i| patients[i].1 == cfg.holdout_center)
        .collect();
    if holdout.len() < cfg.holdout_size {
        log::warn!(
            "only {} {} patients; all go to the hold-out fold",
            holdout.len(),
            cfg.holdout_center
        );
    }
    holdout.shuffle(&mut rng);
    holdout.truncate(cfg.holdout_size);
    let mut in_holdout = vec![false; patients.len()];
    for &i in &holdout {
        in_holdout[i] = true;
    }
    let mut rest: Vec<usize> = (0..patients.len()).filter(|&i| !in_holdout[i]).collect();
    rest.shuffle(&mut rng);
    let mut fold = vec![0u8; patients.len()];
    for (k, &i) in rest.iter().enumerate() {
        fold[i] = (k % cfg.n_folds) as u8 + 1;
    }
    for &i in &holdout {
        fold[i] = cfg.n_folds as u8 + 1;
    }
    Ok(FoldAssignment {
        seed,
        folds: patients.iter().zip(fold).map(|((p, _), f)| (p.clone(), f)).collect(),
    })
}
