//! Segmentation scores: Dice per label, cohort-aggregated Dice, and the soft
//! Dice plus cross-entropy training loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LabelMask;

/// Overlap counts for one label: `(|P ∩ T|, |P|, |T|)`.
fn overlap(pred: &LabelMask, truth: &LabelMask, label: u8) -> Result<(usize, usize, usize)> {
    pred.geometry().require_same(truth.geometry(), "prediction vs truth")?;
    let mut both = 0;
    let mut p = 0;
    let mut t = 0;
    for (&a, &b) in pred.labels().iter().zip(truth.labels()) {
        let (ia, ib) = (a == label, b == label);
        both += usize::from(ia && ib);
        p += usize::from(ia);
        t += usize::from(ib);
    }
    Ok((both, p, t))
}

fn ratio(both: usize, p: usize, t: usize) -> f64 {
    if p + t == 0 {
        1.0
    } else {
        2.0 * both as f64 / (p + t) as f64
    }
}

/// `2|P ∩ T| / (|P| + |T|)`; 1 when both are empty.
pub fn dice(pred: &LabelMask, truth: &LabelMask, label: u8) -> Result<f64> {
    let (b, p, t) = overlap(pred, truth, label)?;
    Ok(ratio(b, p, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDice {
    pub case_id: String,
    /// `(label, dice)`.
    pub dice: Vec<(u8, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceReport {
    pub labels: Vec<u8>,
    pub per_case: Vec<CaseDice>,
    /// Sum-before-divide Dice per label, aligned with `labels`.
    pub aggregated: Vec<f64>,
    pub mean_aggregated: f64,
    /// Mean of per-case Dice per label, aligned with `labels`.
    pub mean_per_case: Vec<f64>,
}

/// Cohort Dice: per label, `2·Σ|P ∩ T| / Σ(|P| + |T|)` over all cases.
/// A label absent from every prediction and truth scores 1.
pub fn aggregated_dice(cases: &[(String, LabelMask, LabelMask)], labels: &[u8]) -> Result<DiceReport> {
    if cases.is_empty() {
        return Err(Error::Invalid("aggregated dice needs at least one case".into()));
    }
    let mut sums = vec![(0usize, 0usize, 0usize); labels.len()];
    let mut per_case = Vec::with_capacity(cases.len());
    for (id, pred, truth) in cases {
        let mut row = Vec::with_capacity(labels.len());
        for (k, &l) in labels.iter().enumerate() {
            let (b, p, t) = overlap(pred, truth, l)?;
            sums[k].0 += b;
            sums[k].1 += p;
            sums[k].2 += t;
            row.push((l, ratio(b, p, t)));
        }
        per_case.push(CaseDice {
            case_id: id.clone(),
            dice: row,
        });
    }
    let aggregated: Vec<f64> = sums.iter().map(|&(b, p, t)| ratio(b, p, t)).collect();
    let mean_per_case = (0..labels.len())
        .map(|k| per_case.iter().map(|c| c.dice[k].1).sum::<f64>() / cases.len() as f64)
        .collect();
    Ok(DiceReport {
        labels: labels.to_vec(),
        mean_aggregated: aggregated.iter().sum::<f64>() / aggregated.len() as f64,
        per_case,
        aggregated,
        mean_per_case,
    })
}

/// Class probabilities per voxel with the true class of each voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSegmentation {
    n_classes: usize,
    /// Voxel-major: `probs[i * n_classes + k]`.
    probs: Vec<f64>,
    truth: Vec<u8>,
}

impl SoftSegmentation {
    pub fn new(n_classes: usize, probs: Vec<f64>, truth: Vec<u8>) -> Result<Self> {
        if n_classes == 0 || probs.len() != truth.len() * n_classes {
            return Err(Error::Schema("probabilities do not match voxels × classes".into()));
        }
        for (i, row) in probs.chunks(n_classes).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-6 {
                return Err(Error::Invalid(format!(
                    "voxel {i}: probabilities do not form a distribution"
                )));
            }
        }
        if let Some(&c) = truth.iter().find(|&&c| c as usize >= n_classes) {
            return Err(Error::Invalid(format!("true class {c} out of range")));
        }
        Ok(Self {
            n_classes,
            probs,
            truth,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_voxels(&self) -> usize {
        self.truth.len()
    }

    pub fn prob(&self, voxel: usize, class: usize) -> f64 {
        self.probs[voxel * self.n_classes + class]
    }

    pub fn truth(&self) -> &[u8] {
        &self.truth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub value: f64,
    pub flags: Vec<String>,
}

/// `−(2/K) Σ_k Σ_i u_ik v_ik / (Σ_i u_ik + Σ_i v_ik)`; a class with a zero
/// denominator contributes 0 and is flagged.
pub fn soft_dice_loss(s: &SoftSegmentation) -> Loss {
    let k = s.n_classes;
    let mut inter = vec![0.0; k];
    let mut denom = vec![0.0; k];
    for (i, &t) in s.truth.iter().enumerate() {
        for c in 0..k {
            let u = s.prob(i, c);
            denom[c] += u;
            if t as usize == c {
                inter[c] += u;
                denom[c] += 1.0;
            }
        }
    }
    let mut flags = Vec::new();
    let mut total = 0.0;
    for c in 0..k {
        if denom[c] == 0.0 {
            flags.push(format!("class_{c}_empty"));
        } else {
            total += inter[c] / denom[c];
        }
    }
    Loss {
        value: -2.0 / k as f64 * total,
        flags,
    }
}

/// Probability floor inside the logarithm of the cross-entropy.
pub const CE_CLAMP: f64 = 1e-12;

/// `−(1/|I|) Σ_i log u_i,true`, with `u` clamped below at [`CE_CLAMP`].
pub fn cross_entropy(s: &SoftSegmentation) -> Loss {
    let mut flags = Vec::new();
    let mut sum = 0.0;
    for (i, &t) in s.truth.iter().enumerate() {
        let u = s.prob(i, t as usize);
        if u < CE_CLAMP && flags.is_empty() {
            flags.push("probability_clamped".to_string());
        }
        sum -= u.max(CE_CLAMP).ln();
    }
    Loss {
        value: sum / s.n_voxels().max(1) as f64,
        flags,
    }
}

/// Soft Dice loss plus cross-entropy.
pub fn total_loss(s: &SoftSegmentation) -> Loss {
    let d = soft_dice_loss(s);
    let ce = cross_entropy(s);
    let mut flags = d.flags;
    flags.extend(ce.flags);
    Loss {
        value: d.value + ce.value,
        flags,
    }
}
