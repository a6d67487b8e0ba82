//! Non-parametric empirical-Bayes ComBat across centres.
//!
//! Per feature, a linear model with one indicator per batch plus biological
//! covariates (gender 0/1, z-scored age and weight) is fitted by least
//! squares. The data are standardised by the pooled residual SD, per-batch
//! location and scale are shrunk by likelihood-weighting the other features'
//! batch estimates, and the adjusted values are mapped back to the original
//! scale with covariate effects restored.
//!
//! The joint mode fits on training and test rows together, which lets test
//! centres influence the estimates applied to training data. The train-only
//! mode fits on training rows and applies frozen estimates.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    /// 0 or 1.
    pub gender: u8,
    pub age: f64,
    pub weight: f64,
}

/// Patients × features with centre labels and covariates per patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub patient_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row per patient.
    pub values: Vec<Vec<f64>>,
    pub center: Vec<String>,
    pub covariates: Vec<Covariates>,
}

impl FeatureMatrix {
    pub fn n_patients(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.patient_ids.len();
        if self.values.len() != n || self.center.len() != n || self.covariates.len() != n {
            return Err(Error::Schema(
                "row counts of values, centres and covariates differ".into(),
            ));
        }
        let g = self.feature_names.len();
        for (id, row) in self.patient_ids.iter().zip(&self.values) {
            if row.len() != g {
                return Err(Error::Schema(format!("{id}: {} values for {g} features", row.len())));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Schema(format!(
                    "{id}: missing or non-finite {}",
                    self.feature_names[j]
                )));
            }
        }
        if let Some(c) = self.covariates.iter().find(|c| c.gender > 1) {
            return Err(Error::Schema(format!("gender must be 0 or 1, got {}", c.gender)));
        }
        Ok(())
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.feature_names != other.feature_names {
            return Err(Error::Schema("feature names differ between matrices".into()));
        }
        if let Some(id) = other.patient_ids.iter().find(|id| self.patient_ids.contains(id)) {
            return Err(Error::Schema(format!("patient {id} appears in both matrices")));
        }
        let mut out = self.clone();
        out.patient_ids.extend(other.patient_ids.iter().cloned());
        out.values.extend(other.values.iter().cloned());
        out.center.extend(other.center.iter().cloned());
        out.covariates.extend(other.covariates.iter().copied());
        Ok(out)
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> FeatureMatrix {
        FeatureMatrix {
            patient_ids: self.patient_ids[start..end].to_vec(),
            feature_names: self.feature_names.clone(),
            values: self.values[start..end].to_vec(),
            center: self.center[start..end].to_vec(),
            covariates: self.covariates[start..end].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CombatOptions {
    /// Include gender, age and weight in the design.
    pub use_covariates: bool,
    /// Permit a single batch; used for identity checks.
    pub allow_single_batch: bool,
}

impl Default for CombatOptions {
    fn default() -> Self {
        Self {
            use_covariates: true,
            allow_single_batch: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarmonizeMode {
    Joint,
    TrainOnly,
}

/// Standardisation of one continuous covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Scale {
    mean: f64,
    sd: f64,
}

/// Frozen ComBat estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombatFit {
    pub feature_names: Vec<String>,
    pub batches: Vec<String>,
    /// Names of covariate columns kept in the design.
    pub covariate_names: Vec<String>,
    age_scale: Option<Scale>,
    weight_scale: Option<Scale>,
    /// Grand mean per feature.
    pub alpha: Vec<f64>,
    /// `beta[c][g]`: effect of covariate column `c` on feature `g`.
    pub beta: Vec<Vec<f64>>,
    /// Pooled residual SD per feature.
    pub sigma: Vec<f64>,
    /// `gamma_hat[b][g]` and `delta_hat[b][g]`: naive batch estimates.
    pub gamma_hat: Vec<Vec<f64>>,
    pub delta_hat: Vec<Vec<f64>>,
    /// Empirical-Bayes location and scale per batch and feature.
    pub gamma_star: Vec<Vec<f64>>,
    pub delta_star: Vec<Vec<f64>>,
    pub flags: Vec<String>,
}

fn scale_of(x: &[f64]) -> Option<Scale> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (var > 1e-12 * mean.abs().max(1.0)).then(|| Scale { mean, sd: var.sqrt() })
}

impl CombatFit {
    fn covariate_row(&self, c: &Covariates) -> Vec<f64> {
        let mut row = Vec::with_capacity(3);
        for name in &self.covariate_names {
            row.push(match name.as_str() {
                "gender" => f64::from(c.gender),
                "age" => {
                    let s = self.age_scale.expect("age kept in design");
                    (c.age - s.mean) / s.sd
                }
                _ => {
                    let s = self.weight_scale.expect("weight kept in design");
                    (c.weight - s.mean) / s.sd
                }
            });
        }
        row
    }

    fn baseline(&self, cov: &[f64], g: usize) -> f64 {
        self.alpha[g] + cov.iter().zip(&self.beta).map(|(x, b)| x * b[g]).sum::<f64>()
    }

    pub fn batch_index(&self, batch: &str) -> Option<usize> {
        self.batches.iter().position(|b| b == batch)
    }

    /// Adjusts rows of `m`. Rows from batches absent at fit time are returned
    /// unchanged and listed in the second element.
    pub fn transform(&self, m: &FeatureMatrix) -> Result<(FeatureMatrix, Vec<String>)> {
        m.validate()?;
        if m.feature_names != self.feature_names {
            return Err(Error::Schema("feature names differ from the fitted matrix".into()));
        }
        let mut out = m.clone();
        let mut unseen = Vec::new();
        for (i, row) in out.values.iter_mut().enumerate() {
            let Some(b) = self.batch_index(&m.center[i]) else {
                unseen.push(m.patient_ids[i].clone());
                continue;
            };
            let cov = self.covariate_row(&m.covariates[i]);
            for (g, v) in row.iter_mut().enumerate() {
                let base = self.baseline(&cov, g);
                let z = (*v - base) / self.sigma[g];
                let adj = (z - self.gamma_star[b][g]) / self.delta_star[b][g].sqrt();
                *v = self.sigma[g] * adj + base;
            }
        }
        Ok((out, unseen))
    }
}

/// Posterior location and scale for feature `g` of one batch: the other
/// features' naive estimates weighted by the likelihood of this feature's
/// standardised batch data under each of them. Returns `None` when there is
/// no other feature to borrow from.
fn eb_estimate(g: usize, z: &[f64], gamma: &[f64], delta: &[f64]) -> Option<(f64, f64)> {
    let n = z.len() as f64;
    let s1: f64 = z.iter().sum();
    let s2: f64 = z.iter().map(|v| v * v).sum();
    let log_lh: Vec<(usize, f64)> = (0..gamma.len())
        .filter(|&k| k != g && delta[k] > 0.0)
        .map(|k| {
            let (m, d) = (gamma[k], delta[k]);
            let sum_sq = (s2 - 2.0 * m * s1 + n * m * m).max(0.0);
            (k, -0.5 * n * (2.0 * std::f64::consts::PI * d).ln() - sum_sq / (2.0 * d))
        })
        .collect();
    let top = log_lh.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let (mut w_sum, mut g_sum, mut d_sum) = (0.0, 0.0, 0.0);
    for &(k, l) in &log_lh {
        let w = (l - top).exp();
        w_sum += w;
        g_sum += w * gamma[k];
        d_sum += w * delta[k];
    }
    Some((g_sum / w_sum, d_sum / w_sum))
}

/// Estimates ComBat parameters on `m`.
pub fn fit(m: &FeatureMatrix, opts: &CombatOptions) -> Result<CombatFit> {
    m.validate()?;
    let n = m.n_patients();
    let n_feat = m.n_features();
    if n_feat == 0 {
        return Err(Error::Schema("no features to harmonise".into()));
    }
    let mut by_batch: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in m.center.iter().enumerate() {
        by_batch.entry(c.as_str()).or_default().push(i);
    }
    if by_batch.len() < 2 && !opts.allow_single_batch {
        return Err(Error::Design(format!(
            "need at least 2 batches, found {}",
            by_batch.len()
        )));
    }
    if let Some((b, rows)) = by_batch.iter().find(|(_, r)| r.len() < 2) {
        return Err(Error::BatchSize {
            batch: b.to_string(),
            size: rows.len(),
        });
    }
    for g in 0..n_feat {
        if scale_of(&m.column(g)).is_none() {
            return Err(Error::DegenerateFeature(m.feature_names[g].clone()));
        }
    }
    let batches: Vec<String> = by_batch.keys().map(|s| s.to_string()).collect();
    let nb = batches.len();

    let mut flags = Vec::new();
    let mut covariate_names = Vec::new();
    let (mut age_scale, mut weight_scale) = (None, None);
    if opts.use_covariates {
        let gender: Vec<f64> = m.covariates.iter().map(|c| f64::from(c.gender)).collect();
        if scale_of(&gender).is_some() {
            covariate_names.push("gender".to_string());
        } else {
            flags.push("constant_gender_dropped".to_string());
        }
        age_scale = scale_of(&m.covariates.iter().map(|c| c.age).collect::<Vec<_>>());
        if age_scale.is_some() {
            covariate_names.push("age".to_string());
        } else {
            flags.push("constant_age_dropped".to_string());
        }
        weight_scale = scale_of(&m.covariates.iter().map(|c| c.weight).collect::<Vec<_>>());
        if weight_scale.is_some() {
            covariate_names.push("weight".to_string());
        } else {
            flags.push("constant_weight_dropped".to_string());
        }
    }
    let mut fit = CombatFit {
        feature_names: m.feature_names.clone(),
        batches,
        covariate_names,
        age_scale,
        weight_scale,
        alpha: vec![0.0; n_feat],
        beta: Vec::new(),
        sigma: vec![0.0; n_feat],
        gamma_hat: Vec::new(),
        delta_hat: Vec::new(),
        gamma_star: Vec::new(),
        delta_star: Vec::new(),
        flags,
    };
    let nc = fit.covariate_names.len();
    let batch_of: Vec<usize> = m
        .center
        .iter()
        .map(|c| fit.batch_index(c).expect("batch collected above"))
        .collect();
    let cov_rows: Vec<Vec<f64>> = m.covariates.iter().map(|c| fit.covariate_row(c)).collect();

    // design: batch indicators then covariates
    let p = nb + nc;
    let x = DMatrix::from_fn(n, p, |i, j| {
        if j < nb {
            f64::from(u8::from(batch_of[i] == j))
        } else {
            cov_rows[i][j - nb]
        }
    });
    let y = DMatrix::from_fn(n, n_feat, |i, g| m.values[i][g]);
    let svd = x.clone().svd(true, true);
    let sv_max = svd.singular_values.max();
    let sv_min = svd.singular_values.min();
    if n <= p || sv_min <= 1e-10 * sv_max {
        return Err(Error::Design(
            "design is singular: a batch is confounded with the covariates".into(),
        ));
    }
    let coef = svd
        .solve(&y, 1e-12 * sv_max)
        .map_err(|e| Error::Design(e.to_string()))?;
    let resid = &y - &x * &coef;

    let sizes: Vec<f64> = (0..nb)
        .map(|b| batch_of.iter().filter(|&&x| x == b).count() as f64)
        .collect();
    fit.beta = (0..nc)
        .map(|c| (0..n_feat).map(|g| coef[(nb + c, g)]).collect())
        .collect();
    for g in 0..n_feat {
        fit.alpha[g] = (0..nb).map(|b| sizes[b] / n as f64 * coef[(b, g)]).sum();
        let var = resid.column(g).iter().map(|r| r * r).sum::<f64>() / n as f64;
        fit.sigma[g] = var.sqrt().max(f64::MIN_POSITIVE);
    }

    // standardised data, row-major
    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n_feat)
                .map(|g| (m.values[i][g] - fit.baseline(&cov_rows[i], g)) / fit.sigma[g])
                .collect()
        })
        .collect();
    let rows_of: Vec<Vec<usize>> = (0..nb)
        .map(|b| (0..n).filter(|&i| batch_of[i] == b).collect())
        .collect();
    for rows in &rows_of {
        let nbf = rows.len() as f64;
        let mut gh = vec![0.0; n_feat];
        let mut dh = vec![0.0; n_feat];
        for g in 0..n_feat {
            let mean = rows.iter().map(|&i| z[i][g]).sum::<f64>() / nbf;
            gh[g] = mean;
            dh[g] = rows.iter().map(|&i| (z[i][g] - mean).powi(2)).sum::<f64>() / nbf;
        }
        fit.gamma_hat.push(gh);
        fit.delta_hat.push(dh);
    }
    if n_feat < 2 {
        fit.flags.push("single_feature_naive_estimates".to_string());
    }
    for (b, rows) in rows_of.iter().enumerate() {
        let (gh, dh) = (&fit.gamma_hat[b], &fit.delta_hat[b]);
        let est: Vec<(f64, f64)> = (0..n_feat)
            .into_par_iter()
            .map(|g| {
                let zg: Vec<f64> = rows.iter().map(|&i| z[i][g]).collect();
                eb_estimate(g, &zg, gh, dh).unwrap_or((gh[g], dh[g]))
            })
            .collect();
        let (gs, ds): (Vec<f64>, Vec<f64>) = est.into_iter().unzip();
        if let Some(g) = ds.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::DegenerateFeature(format!(
                "{}: zero scale within batch {}",
                fit.feature_names[g], fit.batches[b]
            )));
        }
        fit.gamma_star.push(gs);
        fit.delta_star.push(ds);
    }
    Ok(fit)
}

/// Fits and applies ComBat on one matrix.
pub fn combat_harmonize(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    combat_harmonize_with(m, &CombatOptions::default())
}

pub fn combat_harmonize_with(m: &FeatureMatrix, opts: &CombatOptions) -> Result<FeatureMatrix> {
    Ok(fit(m, opts)?.transform(m)?.0)
}

/// Harmonises the concatenation of `train` and `test` once and splits it back.
///
/// Test centres' data shape the estimates applied to the training rows.
pub fn joint_fit_transform(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    opts: &CombatOptions,
) -> Result<(FeatureMatrix, FeatureMatrix, CombatFit)> {
    let all = train.concat(test)?;
    let fit = fit(&all, opts)?;
    let (h, _) = fit.transform(&all)?;
    let k = train.n_patients();
    Ok((h.slice(0, k), h.slice(k, h.n_patients()), fit))
}

/// Fits on `train` only; test rows from centres unseen in training pass
/// through unchanged and are listed.
pub fn train_only_fit_transform(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    opts: &CombatOptions,
) -> Result<(FeatureMatrix, FeatureMatrix, CombatFit, Vec<String>)> {
    if train.feature_names != test.feature_names {
        return Err(Error::Schema("feature names differ between matrices".into()));
    }
    let fit = fit(train, opts)?;
    let (tr, _) = fit.transform(train)?;
    let (te, unseen) = fit.transform(test)?;
    Ok((tr, te, fit, unseen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn matrix(rows: Vec<Vec<f64>>, centers: Vec<&str>, rng: &mut ChaCha8Rng) -> FeatureMatrix {
        let n = rows.len();
        let g = rows[0].len();
        FeatureMatrix {
            patient_ids: (0..n).map(|i| format!("P{i:04}")).collect(),
            feature_names: (0..g).map(|j| format!("f{j}")).collect(),
            values: rows,
            center: centers.into_iter().map(String::from).collect(),
            covariates: (0..n)
                .map(|_| Covariates {
                    gender: rng.random_range(0..2),
                    age: rng.random_range(40.0..80.0),
                    weight: rng.random_range(50.0..100.0),
                })
                .collect(),
        }
    }

    fn batch_means(m: &FeatureMatrix, g: usize, batch: &str) -> f64 {
        let v: Vec<f64> = (0..m.n_patients())
            .filter(|&i| m.center[i] == batch)
            .map(|i| m.values[i][g])
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn single_batch_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| normal.sample(&mut rng) * 3.0 + 10.0).collect())
            .collect();
        let m = matrix(rows, vec!["A"; 40], &mut rng);
        let opts = CombatOptions {
            allow_single_batch: true,
            ..Default::default()
        };
        let h = combat_harmonize_with(&m, &opts).unwrap();
        for (a, b) in m.values.iter().flatten().zip(h.values.iter().flatten()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(matches!(combat_harmonize(&m), Err(Error::Design(_))));
    }

    #[test]
    fn shift_across_features_is_removed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 200;
        let rows: Vec<Vec<f64>> = (0..2 * n)
            .map(|i| {
                let shift = if i >= n { 5.0 } else { 0.0 };
                (0..20).map(|_| normal.sample(&mut rng) * 2.0 + shift).collect()
            })
            .collect();
        let centers: Vec<&str> = (0..2 * n).map(|i| if i < n { "A" } else { "B" }).collect();
        let m = matrix(rows, centers, &mut rng);
        let h = combat_harmonize(&m).unwrap();
        for g in 0..20 {
            let before = (batch_means(&m, g, "B") - batch_means(&m, g, "A")).abs();
            let after = (batch_means(&h, g, "B") - batch_means(&h, g, "A")).abs();
            assert!(after <= 0.1 * before, "feature {g}: {before} -> {after}");
        }
    }

    #[test]
    fn singleton_batch_and_confounded_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = matrix(rows.clone(), vec!["A", "A", "B", "B", "C"], &mut rng);
        assert!(matches!(
            fit(&m, &CombatOptions::default()),
            Err(Error::BatchSize { size: 1, .. })
        ));
        let mut m = matrix(rows, vec!["A", "A", "B", "B", "B"], &mut rng);
        for (i, c) in m.covariates.iter_mut().enumerate() {
            c.gender = u8::from(i >= 2);
        }
        assert!(matches!(fit(&m, &CombatOptions::default()), Err(Error::Design(_))));
    }

    #[test]
    fn joint_equals_direct_and_unseen_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| (0..4).map(|_| normal.sample(&mut rng) + (i % 3) as f64).collect())
            .collect();
        let centers: Vec<&str> = (0..60).map(|i| ["A", "B", "C"][i % 3]).collect();
        let m = matrix(rows, centers, &mut rng);
        let (train, test) = (m.slice(0, 45), m.slice(45, 60));
        let (tr, te, _) = joint_fit_transform(&train, &test, &CombatOptions::default()).unwrap();
        let direct = combat_harmonize(&m).unwrap();
        assert_eq!(tr.concat(&te).unwrap().values, direct.values);

        let mut test = test;
        test.center[0] = "Z".into();
        let (_, te, _, unseen) = train_only_fit_transform(&train, &test, &CombatOptions::default()).unwrap();
        assert_eq!(unseen, vec![test.patient_ids[0].clone()]);
        assert_eq!(te.values[0], test.values[0]);
    }
}
