use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{columns, concordance_index, cox_fit, SurvivalRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionThresholds {
    /// Keep features whose univariate training C-index exceeds this.
    pub min_cindex: f64,
    /// Drop a feature whose |Pearson ρ| with a kept feature reaches this.
    pub max_abs_correlation: f64,
}

impl Default for SelectionThresholds {
    fn default() -> Self {
        Self {
            min_cindex: 0.50,
            max_abs_correlation: 0.60,
        }
    }
}

/// Trace of the selection cascade; each kept list is a subset of the one
/// before.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Training C-index of each feature's univariate model, in input order.
    pub univariate: Vec<(String, f64)>,
    pub kept_after_univariate: Vec<String>,
    pub kept_after_correlation: Vec<String>,
    pub kept_after_lasso: Option<Vec<String>>,
    pub thresholds: SelectionThresholds,
    pub lambda: Option<f64>,
}

impl SelectionReport {
    /// Whether the kept sets are nested as they should be.
    pub fn is_nested(&self) -> bool {
        let all: Vec<&String> = self.univariate.iter().map(|(n, _)| n).collect();
        let sub = |a: &[String], b: &[&String]| a.iter().all(|x| b.contains(&x));
        let uni: Vec<&String> = self.kept_after_univariate.iter().collect();
        let cor: Vec<&String> = self.kept_after_correlation.iter().collect();
        sub(&self.kept_after_univariate, &all)
            && sub(&self.kept_after_correlation, &uni)
            && self.kept_after_lasso.as_ref().is_none_or(|l| sub(l, &cor))
    }
}

/// Univariate Cox fit per feature, scored by training C-index. Returns every
/// successfully fitted feature with its score and the names above
/// `threshold`, both in input order. Features that fail to fit are dropped.
pub fn univariate_filter(
    names: &[String],
    rows: &[Vec<f64>],
    records: &[SurvivalRecord],
    threshold: f64,
) -> (Vec<(String, f64)>, Vec<String>) {
    let cols = columns(rows, names.len());
    let scored: Vec<Option<(String, f64)>> = names
        .par_iter()
        .zip(cols.par_iter())
        .map(|(name, col)| {
            let single: Vec<Vec<f64>> = col.iter().map(|&v| vec![v]).collect();
            let fitted = cox_fit(std::slice::from_ref(name), &single, records).and_then(|m| {
                let risks: Vec<f64> = single.iter().map(|x| m.linear_predictor(x)).collect();
                concordance_index(&risks, records)
            });
            match fitted {
                Ok(c) => Some((name.clone(), c)),
                Err(e) => {
                    log::warn!("dropping {name}: {e}");
                    None
                }
            }
        })
        .collect();
    let scored: Vec<(String, f64)> = scored.into_iter().flatten().collect();
    let kept = scored
        .iter()
        .filter(|(_, c)| *c > threshold)
        .map(|(n, _)| n.clone())
        .collect();
    (scored, kept)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Greedy pruning: visit `candidates` by descending score (ties by name) and
/// keep one when its |ρ| with every kept feature is below `rho_max`.
/// `column` returns a feature's values.
pub fn correlation_prune<'a>(
    candidates: &[(String, f64)],
    column: impl Fn(&str) -> &'a [f64],
    rho_max: f64,
) -> Vec<String> {
    let mut ranked: Vec<&(String, f64)> = candidates.iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut kept: Vec<&str> = Vec::new();
    for (name, _) in ranked {
        let x = column(name);
        if kept.iter().all(|k| pearson(x, column(k)).abs() < rho_max) {
            kept.push(name);
        }
    }
    kept.into_iter().map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn chain_keeps_ends() {
        // A~B and B~C strongly, A~C weakly
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let b = vec![1.0, 2.0, 3.0, 4.0, 6.0, 5.0, 8.0, 7.0];
        let c = vec![2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0];
        let ab = pearson(&a, &b);
        assert!(ab > 0.6);
        let data: HashMap<&str, Vec<f64>> = [("A", a), ("B", b), ("C", c)].into_iter().collect();
        let cands = vec![("A".to_string(), 0.9), ("B".to_string(), 0.8), ("C".to_string(), 0.7)];
        let kept = correlation_prune(&cands, |n| data[n].as_slice(), 0.6);
        assert_eq!(kept[0], "A");
        assert!(!kept.contains(&"B".to_string()));
    }

    #[test]
    fn identical_features_keep_higher_ranked() {
        let x = vec![1.0, 3.0, 2.0, 5.0];
        let cands = vec![("b".to_string(), 0.7), ("a".to_string(), 0.7)];
        let kept = correlation_prune(&cands, |_| x.as_slice(), 0.6);
        assert_eq!(kept, vec!["a".to_string()]);
    }

    #[test]
    fn threshold_one_drops_everything() {
        let rows: Vec<Vec<f64>> = (1..=10).map(|i| vec![-(i as f64)]).collect();
        let rec: Vec<SurvivalRecord> = (1..=10).map(|t| SurvivalRecord::new(t as f64, true).unwrap()).collect();
        let names = vec!["x".to_string()];
        let (scored, kept) = univariate_filter(&names, &rows, &rec, 0.5);
        assert!(scored[0].1 > 0.9);
        assert_eq!(kept, names);
        assert!(univariate_filter(&names, &rows, &rec, 1.0).1.is_empty());
    }
}
