use super::SurvivalRecord;
use crate::error::{Error, Result};

/// Fenwick tree of counts over risk ranks.
struct Counts(Vec<u64>);

impl Counts {
    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell's C-index: over pairs with `time_i < time_j` and an event at `i`,
/// the fraction where `risk_i > risk_j`, tied risks counting one half.
///
/// Runs in O(n log n).
pub fn concordance_index(risks: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    if risks.len() != records.len() {
        return Err(Error::Schema(format!(
            "{} risks for {} records",
            risks.len(),
            records.len()
        )));
    }
    if let Some(r) = risks.iter().find(|r| r.is_nan()) {
        return Err(Error::Invalid(format!("risk score {r}")));
    }
    let n = risks.len();
    let mut sorted_risks: Vec<f64> = risks.to_vec();
    sorted_risks.sort_by(f64::total_cmp);
    sorted_risks.dedup();
    let rank = |r: f64| sorted_risks.partition_point(|&v| v < r);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));
    let mut tree = Counts(vec![0; sorted_risks.len() + 1]);
    let (mut inserted, mut permissible, mut concordant, mut tied) = (0u64, 0u64, 0u64, 0u64);
    let mut start = 0;
    while start < n {
        let t = records[order[start]].time;
        let end = start + order[start..].iter().take_while(|&&i| records[i].time == t).count();
        for &i in &order[start..end] {
            if records[i].event {
                let r = rank(risks[i]);
                let lower = tree.below(r);
                let lower_eq = tree.below(r + 1);
                permissible += inserted;
                concordant += lower;
                tied += lower_eq - lower;
            }
        }
        for &i in &order[start..end] {
            tree.add(rank(risks[i]));
            inserted += 1;
        }
        start = end;
    }
    if permissible == 0 {
        return Err(Error::Undefined("C-index has no permissible pairs".into()));
    }
    Ok((concordant as f64 + 0.5 * tied as f64) / permissible as f64)
}
