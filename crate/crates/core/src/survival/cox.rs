use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{columns, SurvivalRecord};
use crate::error::{Error, Result};

/// Handling of tied event times in the partial likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Breslow,
    Efron,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoxOptions {
    pub ties: Ties,
    /// L2 penalty `ridge/2 · |β|²` on standardised coefficients.
    pub ridge: f64,
    pub max_iter: usize,
    /// Convergence threshold on the change in log partial likelihood.
    pub tol: f64,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            ties: Ties::Breslow,
            ridge: 0.0,
            max_iter: 100,
            tol: 1e-9,
        }
    }
}

/// Per-feature mean and sample SD applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn fit(names: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len() as f64;
        let mut mean = Vec::with_capacity(names.len());
        let mut sd = Vec::with_capacity(names.len());
        for (j, col) in columns(rows, names.len()).iter().enumerate() {
            if let Some(v) = col.iter().find(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("{}: non-finite value {v}", names[j])));
            }
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
            if !(var > 1e-24 * m.abs().max(1.0).powi(2)) {
                return Err(Error::DegenerateFeature(names[j].clone()));
            }
            mean.push(m);
            sd.push(var.sqrt());
        }
        Ok(Self { mean, sd })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// Fitted proportional-hazards model on standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub feature_names: Vec<String>,
    /// Coefficients on the standardised scale.
    pub coefficients: Vec<f64>,
    pub standardization: Standardization,
    pub ties: Ties,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CoxModel {
    /// Coefficients per raw unit of each feature.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.standardization.sd)
            .map(|(b, s)| b / s)
            .collect()
    }

    /// Linear predictor for values ordered as `feature_names`.
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.standardization
            .apply(x)
            .iter()
            .zip(&self.coefficients)
            .map(|(z, b)| z * b)
            .sum()
    }

    /// Linear predictor looked up by feature name; higher means higher risk.
    pub fn risk_score(&self, names: &[String], values: &[f64]) -> Result<f64> {
        let x = self
            .feature_names
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .map(|k| values[k])
                    .ok_or_else(|| Error::Schema(format!("feature {f} is missing")))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.linear_predictor(&x))
    }

    pub fn risk_scores(&self, names: &[String], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.risk_score(names, r)).collect()
    }
}

/// Patients grouped by distinct time, latest first.
pub(crate) struct RiskSets {
    /// Patient indices sorted by decreasing time.
    pub order: Vec<usize>,
    /// `(start, end)` ranges in `order` sharing one time.
    pub groups: Vec<(usize, usize)>,
    pub events: Vec<bool>,
}

impl RiskSets {
    pub fn new(records: &[SurvivalRecord]) -> Self {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time).then(a.cmp(&b)));
        let mut groups = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let t = records[order[start]].time;
            let mut end = start + 1;
            while end < order.len() && records[order[end]].time == t {
                end += 1;
            }
            groups.push((start, end));
            start = end;
        }
        Self {
            order,
            groups,
            events: records.iter().map(|r| r.event).collect(),
        }
    }
}

/// Log partial likelihood, gradient and negative Hessian at `beta` for
/// standardised rows `z`.
pub(crate) fn derivatives(
    sets: &RiskSets,
    z: &[Vec<f64>],
    beta: &[f64],
    ties: Ties,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = beta.len();
    let eta: Vec<f64> = z.iter().map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut ll = 0.0;
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut a0 = 0.0;
    let mut a1 = DVector::zeros(p);
    let mut a2 = DMatrix::zeros(p, p);
    for &(s, e) in &sets.groups {
        let mut b0 = 0.0;
        let mut b1 = DVector::zeros(p);
        let mut b2 = DMatrix::zeros(p, p);
        let mut d = 0usize;
        for &i in &sets.order[s..e] {
            let x = DVector::from_column_slice(&z[i]);
            let xx = &x * x.transpose();
            a0 += w[i];
            a1 += w[i] * &x;
            a2 += w[i] * &xx;
            if sets.events[i] {
                d += 1;
                b0 += w[i];
                b1 += w[i] * &x;
                b2 += w[i] * xx;
                ll += eta[i];
                grad += x;
            }
        }
        for l in 0..d {
            let f = match ties {
                Ties::Breslow => 0.0,
                Ties::Efron => l as f64 / d as f64,
            };
            let s0 = a0 - f * b0;
            let s1 = &a1 - f * &b1;
            let s2 = &a2 - f * &b2;
            ll -= s0.ln() + shift;
            let mean = &s1 / s0;
            grad -= &mean;
            info += s2 / s0 - &mean * mean.transpose();
        }
    }
    (ll, grad, info)
}

/// Log partial likelihood and its gradient at `beta` on already-standardised
/// rows.
pub fn cox_log_likelihood(z: &[Vec<f64>], records: &[SurvivalRecord], beta: &[f64], ties: Ties) -> (f64, Vec<f64>) {
    let (ll, g, _) = derivatives(&RiskSets::new(records), z, beta, ties);
    (ll, g.iter().copied().collect())
}

fn penalised(ll: f64, beta: &[f64], ridge: f64) -> f64 {
    ll - 0.5 * ridge * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Newton-Raphson with step halving, Breslow ties, no ridge.
pub fn cox_fit(names: &[String], rows: &[Vec<f64>], records: &[SurvivalRecord]) -> Result<CoxModel> {
    cox_fit_with(names, rows, records, &CoxOptions::default())
}

pub fn cox_fit_with(
    names: &[String],
    rows: &[Vec<f64>],
    records: &[SurvivalRecord],
    opts: &CoxOptions,
) -> Result<CoxModel> {
    let p = names.len();
    if p == 0 {
        return Err(Error::EmptySelection("cox model needs at least one feature".into()));
    }
    if rows.len() != records.len() || rows.iter().any(|r| r.len() != p) {
        return Err(Error::Schema("feature rows do not match records".into()));
    }
    let events = records.iter().filter(|r| r.event).count();
    if events < 2 {
        return Err(Error::Invalid(format!(
            "cox fit needs at least 2 events, found {events}"
        )));
    }
    let standardization = Standardization::fit(names, rows)?;
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardization.apply(r)).collect();
    let sets = RiskSets::new(records);

    let mut beta = vec![0.0; p];
    let (ll, mut grad, mut info) = derivatives(&sets, &z, &beta, opts.ties);
    let mut obj = penalised(ll, &beta, opts.ridge);
    let mut ll_current = ll;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        for j in 0..p {
            grad[j] -= opts.ridge * beta[j];
            info[(j, j)] += opts.ridge;
        }
        let step = match info.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => {
                // fall back to a damped step when the information is not PD
                let mut damped = info.clone();
                for j in 0..p {
                    damped[(j, j)] += 1e-6 + damped[(j, j)].abs() * 1e-3;
                }
                damped.lu().solve(&grad).unwrap_or_else(|| grad.clone())
            }
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let (ll_t, g_t, i_t) = derivatives(&sets, &z, &trial, opts.ties);
            let obj_t = penalised(ll_t, &trial, opts.ridge);
            if obj_t.is_finite() && obj_t >= obj - 1e-12 * obj.abs().max(1.0) {
                accepted = Some((trial, ll_t, g_t, i_t, obj_t));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, ll_t, g_t, i_t, obj_t)) = accepted else {
            converged = true;
            break;
        };
        let change = (obj_t - obj).abs();
        beta = trial;
        grad = g_t;
        info = i_t;
        obj = obj_t;
        ll_current = ll_t;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged || beta.iter().any(|b| !b.is_finite()) {
        log::warn!("cox fit did not converge after {iterations} iterations");
        converged = false;
    }
    Ok(CoxModel {
        feature_names: names.to_vec(),
        coefficients: beta,
        standardization,
        ties: opts.ties,
        log_likelihood: ll_current,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let rec: Vec<SurvivalRecord> = (0..40)
            .map(|_| SurvivalRecord {
                time: f64::from(rng.random_range(1..15u8)),
                event: rng.random_bool(0.6),
            })
            .collect();
        for ties in [Ties::Breslow, Ties::Efron] {
            let beta = [0.3, -0.2, 0.5];
            let (_, g) = cox_log_likelihood(&z, &rec, &beta, ties);
            for j in 0..3 {
                let h = 1e-6;
                let mut up = beta;
                up[j] += h;
                let mut dn = beta;
                dn[j] -= h;
                let fd =
                    (cox_log_likelihood(&z, &rec, &up, ties).0 - cox_log_likelihood(&z, &rec, &dn, ties).0) / (2.0 * h);
                assert!(
                    (fd - g[j]).abs() < 1e-6 * g[j].abs().max(1.0),
                    "{ties:?} {j}: {fd} vs {}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn recovers_hazard_ratio_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4000;
        let mut rows = Vec::new();
        let mut rec = Vec::new();
        for i in 0..n {
            let x = (i % 2) as f64;
            let rate = 0.1 * (x * 2f64.ln()).exp();
            let t: f64 = -rng.random::<f64>().ln() / rate;
            let c: f64 = rng.random_range(0.0..30.0);
            rows.push(vec![x]);
            rec.push(SurvivalRecord::new(t.min(c).max(1e-6), t <= c).unwrap());
        }
        let m = cox_fit(&names(1), &rows, &rec).unwrap();
        assert!(m.converged);
        let b = m.raw_coefficients()[0];
        assert!((b - 2f64.ln()).abs() < 0.15, "{b}");
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let rows = vec![vec![1.0]; 5];
        let rec: Vec<_> = (1..=5).map(|t| SurvivalRecord::new(t as f64, true).unwrap()).collect();
        assert!(matches!(
            cox_fit(&names(1), &rows, &rec),
            Err(Error::DegenerateFeature(_))
        ));
    }
}
