use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cox::{RiskSets, Standardization};
use super::{columns, concordance_index, cox_fit_with, CoxModel, CoxOptions, SurvivalRecord, Ties};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    pub n_lambda: usize,
    /// Smallest λ as a fraction of λ_max.
    pub min_ratio: f64,
    pub folds: usize,
    pub seed: u64,
    /// Refit an unpenalised Cox model on the selected features.
    pub refit: bool,
    pub ties: Ties,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            n_lambda: 50,
            min_ratio: 0.01,
            folds: 5,
            seed: 20220901,
            refit: true,
            ties: Ties::Breslow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoResult {
    pub selected: Vec<String>,
    pub lambda: f64,
    pub lambdas: Vec<f64>,
    /// Mean held-out C-index per λ; `None` where no fold was scorable.
    pub cv_cindex: Vec<Option<f64>>,
    /// Standardised coefficients per λ on all training rows.
    pub path: Vec<Vec<f64>>,
    pub model: CoxModel,
}

/// Scalar risk-set pass: log partial likelihood, and if `col` is given the
/// first and negated second derivative along it.
fn scan(sets: &RiskSets, eta: &[f64], col: Option<&[f64]>, ties: Ties) -> (f64, f64, f64) {
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut ll, mut g, mut h) = (0.0, 0.0, 0.0);
    let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
    for &(s, e) in &sets.groups {
        let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
        let mut d = 0usize;
        for &i in &sets.order[s..e] {
            let w = (eta[i] - shift).exp();
            let x = col.map_or(0.0, |c| c[i]);
            a0 += w;
            a1 += w * x;
            a2 += w * x * x;
            if sets.events[i] {
                d += 1;
                b0 += w;
                b1 += w * x;
                b2 += w * x * x;
                ll += eta[i];
                g += x;
            }
        }
        for l in 0..d {
            let f = match ties {
                Ties::Breslow => 0.0,
                Ties::Efron => l as f64 / d as f64,
            };
            let s0 = a0 - f * b0;
            let m = (a1 - f * b1) / s0;
            ll -= s0.ln() + shift;
            g -= m;
            h += (a2 - f * b2) / s0 - m * m;
        }
    }
    (ll, g, h)
}

fn soft(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Coordinate-wise Newton with soft-thresholding on `ℓ(β)/n − λ·Σ|β|`,
/// starting from `beta`.
fn solve(cols: &[Vec<f64>], sets: &RiskSets, beta: &mut [f64], lambda: f64, ties: Ties) {
    let n = sets.order.len() as f64;
    let mut eta: Vec<f64> = (0..sets.order.len())
        .map(|i| cols.iter().zip(beta.iter()).map(|(c, b)| c[i] * b).sum())
        .collect();
    let penalty = |b: &[f64]| lambda * b.iter().map(|v| v.abs()).sum::<f64>();
    let mut obj = scan(sets, &eta, None, ties).0 / n - penalty(beta);
    for _ in 0..1000 {
        let mut max_change: f64 = 0.0;
        for j in 0..cols.len() {
            let (_, g, h) = scan(sets, &eta, Some(&cols[j]), ties);
            let (g, h) = (g / n, h / n);
            if h <= 1e-12 {
                continue;
            }
            let target = soft(h * beta[j] + g, lambda) / h;
            let mut delta = target - beta[j];
            if delta == 0.0 {
                continue;
            }
            let old = beta[j];
            for _ in 0..30 {
                beta[j] = old + delta;
                let trial: Vec<f64> = eta.iter().zip(&cols[j]).map(|(e, x)| e + delta * x).collect();
                let obj_t = scan(sets, &trial, None, ties).0 / n - penalty(beta);
                if obj_t >= obj - 1e-15 {
                    eta = trial;
                    obj = obj_t;
                    break;
                }
                delta *= 0.5;
                beta[j] = old;
            }
            max_change = max_change.max((beta[j] - old).abs());
        }
        if max_change < 1e-9 {
            break;
        }
    }
}

/// Smallest λ at which every coefficient is zero: `max_j |∂ℓ/∂β_j(0)| / n`.
pub fn lambda_max(z: &[Vec<f64>], records: &[SurvivalRecord], ties: Ties) -> f64 {
    let p = z.first().map_or(0, Vec::len);
    let cols = columns(z, p);
    let sets = RiskSets::new(records);
    let eta = vec![0.0; z.len()];
    cols.iter()
        .map(|c| scan(&sets, &eta, Some(c), ties).1.abs() / z.len() as f64)
        .fold(0.0, f64::max)
}

/// `n` values from `max` down to `max · min_ratio`, evenly spaced in log.
pub fn lambda_grid(max: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![max];
    }
    (0..n)
        .map(|k| max * min_ratio.powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Warm-started solutions along a descending `grid` on standardised rows.
pub fn lasso_path(z: &[Vec<f64>], records: &[SurvivalRecord], grid: &[f64], ties: Ties) -> Vec<Vec<f64>> {
    let p = z.first().map_or(0, Vec::len);
    let cols = columns(z, p);
    let sets = RiskSets::new(records);
    let mut beta = vec![0.0; p];
    grid.iter()
        .map(|&l| {
            solve(&cols, &sets, &mut beta, l, ties);
            beta.clone()
        })
        .collect()
}

fn fold_assignment(records: &[SurvivalRecord], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut rng);
    // events first so each fold gets a share of them
    idx.sort_by_key(|&i| !records[i].event);
    let mut fold = vec![0; records.len()];
    for (r, &i) in idx.iter().enumerate() {
        fold[i] = r % k;
    }
    fold
}

/// Lasso-Cox selection with λ picked by maximum mean cross-validated C-index
/// among λ values that keep at least one feature (ties go to the larger λ).
pub fn lasso_cox(
    names: &[String],
    rows: &[Vec<f64>],
    records: &[SurvivalRecord],
    cfg: &LassoConfig,
) -> Result<LassoResult> {
    let p = names.len();
    if p == 0 {
        return Err(Error::EmptySelection("lasso received no features".into()));
    }
    if cfg.folds < 2 {
        return Err(Error::Invalid("lasso cross-validation needs at least 2 folds".into()));
    }
    let std = Standardization::fit(names, rows)?;
    let z: Vec<Vec<f64>> = rows.iter().map(|r| std.apply(r)).collect();
    let lmax = lambda_max(&z, records, cfg.ties);
    if !(lmax > 0.0) {
        return Err(Error::EmptySelection("null-model gradient is zero".into()));
    }
    let lambdas = lambda_grid(lmax, cfg.n_lambda, cfg.min_ratio);
    let path = lasso_path(&z, records, &lambdas, cfg.ties);

    let fold = fold_assignment(records, cfg.folds, cfg.seed);
    let per_fold: Vec<Vec<Option<f64>>> = (0..cfg.folds)
        .map(|f| {
            let train: Vec<usize> = (0..z.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..z.len()).filter(|&i| fold[i] == f).collect();
            let zt: Vec<Vec<f64>> = train.iter().map(|&i| z[i].clone()).collect();
            let rt: Vec<SurvivalRecord> = train.iter().map(|&i| records[i]).collect();
            let rv: Vec<SurvivalRecord> = test.iter().map(|&i| records[i]).collect();
            lasso_path(&zt, &rt, &lambdas, cfg.ties)
                .iter()
                .map(|beta| {
                    let risks: Vec<f64> = test
                        .iter()
                        .map(|&i| z[i].iter().zip(beta).map(|(a, b)| a * b).sum())
                        .collect();
                    concordance_index(&risks, &rv).ok()
                })
                .collect()
        })
        .collect();
    let cv_cindex: Vec<Option<f64>> = (0..lambdas.len())
        .map(|k| {
            let scores: Vec<f64> = per_fold.iter().filter_map(|f| f[k]).collect();
            (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (k, score) in cv_cindex.iter().enumerate() {
        let Some(s) = *score else { continue };
        if path[k].iter().all(|&b| b == 0.0) {
            continue;
        }
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((k, s));
        }
    }
    let Some((k, _)) = best else {
        return Err(Error::EmptySelection("lasso kept no feature at any λ".into()));
    };
    let keep: Vec<usize> = (0..p).filter(|&j| path[k][j] != 0.0).collect();
    let selected: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
    let model = if cfg.refit {
        let sub: Vec<Vec<f64>> = rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
        let opts = CoxOptions {
            ties: cfg.ties,
            ..Default::default()
        };
        cox_fit_with(&selected, &sub, records, &opts)?
    } else {
        CoxModel {
            feature_names: selected.clone(),
            coefficients: keep.iter().map(|&j| path[k][j]).collect(),
            standardization: Standardization {
                mean: keep.iter().map(|&j| std.mean[j]).collect(),
                sd: keep.iter().map(|&j| std.sd[j]).collect(),
            },
            ties: cfg.ties,
            log_likelihood: f64::NAN,
            iterations: 0,
            converged: true,
        }
    };
    Ok(LassoResult {
        selected,
        lambda: lambdas[k],
        lambdas,
        cv_cindex,
        path,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::cox_fit;
    use rand::Rng;

    fn cohort(n: usize, p: usize, seed: u64) -> (Vec<String>, Vec<Vec<f64>>, Vec<SurvivalRecord>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let rec = rows
            .iter()
            .map(|r| {
                let rate = (1.2 * r[0] - 0.8 * r.get(1).unwrap_or(&0.0)).exp() * 0.1;
                let t: f64 = -rng.random::<f64>().ln() / rate;
                let c: f64 = rng.random_range(0.0..40.0);
                SurvivalRecord::new(t.min(c).max(1e-6), t <= c).unwrap()
            })
            .collect();
        ((0..p).map(|j| format!("x{j}")).collect(), rows, rec)
    }

    fn standardised(names: &[String], rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let s = Standardization::fit(names, rows).unwrap();
        rows.iter().map(|r| s.apply(r)).collect()
    }

    #[test]
    fn zero_penalty_matches_newton() {
        let (names, rows, rec) = cohort(150, 3, 4);
        let z = standardised(&names, &rows);
        let path = lasso_path(&z, &rec, &[0.0], Ties::Breslow);
        let m = cox_fit(&names, &rows, &rec).unwrap();
        for (a, b) in path[0].iter().zip(&m.coefficients) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let (names, rows, rec) = cohort(120, 4, 6);
        let z = standardised(&names, &rows);
        let lm = lambda_max(&z, &rec, Ties::Breslow);
        let path = lasso_path(&z, &rec, &[lm, lm * 0.9], Ties::Breslow);
        assert!(path[0].iter().all(|&b| b == 0.0));
        assert!(path[1].iter().any(|&b| b != 0.0));
    }

    #[test]
    fn single_feature_path_shrinks_monotonically() {
        let (names, rows, rec) = cohort(100, 1, 8);
        let z = standardised(&names, &rows);
        let grid = lambda_grid(lambda_max(&z, &rec, Ties::Breslow), 20, 0.01);
        let path = lasso_path(&z, &rec, &grid, Ties::Breslow);
        for w in path.windows(2) {
            assert!(w[0][0].abs() <= w[1][0].abs() + 1e-9);
        }
    }

    #[test]
    fn selects_signal_features() {
        let (names, rows, rec) = cohort(300, 6, 12);
        let r = lasso_cox(&names, &rows, &rec, &LassoConfig::default()).unwrap();
        assert!(r.selected.contains(&"x0".to_string()));
        assert!(r.selected.contains(&"x1".to_string()));
        assert_eq!(r.model.feature_names, r.selected);
    }
}
