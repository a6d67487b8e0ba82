//! Neighbourhood grey-tone difference matrix.

use super::{DiscretizedRoi, FeatureSet};
use crate::volume::OFFSETS_26;

/// Upper bound reported for coarseness when the ROI has no grey-tone
/// differences.
pub const COARSENESS_CAP: f64 = 1e6;

/// Per-level voxel counts `n` and summed absolute differences `s` to the
/// mean level of the in-ROI 26-neighbourhood. Voxels without ROI
/// neighbours are left out.
#[derive(Debug, Clone, PartialEq)]
pub struct NgtdmTable {
    pub n: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn ngtdm_table(disc: &DiscretizedRoi) -> NgtdmTable {
    let ng = disc.n_bins() as usize;
    let mut table = NgtdmTable {
        n: vec![0.0; ng],
        s: vec![0.0; ng],
    };
    let levels = disc.levels();
    for (i, &l) in levels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let (mut sum, mut count) = (0.0, 0usize);
        for &o in &OFFSETS_26 {
            let nl = disc.level_at_offset(i, o);
            if nl > 0 {
                sum += f64::from(nl);
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let k = l as usize - 1;
        table.n[k] += 1.0;
        table.s[k] += (f64::from(l) - sum / count as f64).abs();
    }
    table
}

pub fn ngtdm_features_from_table(t: &NgtdmTable) -> FeatureSet {
    let mut out = FeatureSet::default();
    let nv: f64 = t.n.iter().sum();
    if nv == 0.0 {
        // only isolated voxels: no neighbourhoods at all
        for name in ["coarseness", "contrast", "busyness", "complexity", "strength"] {
            out.push(name, if name == "coarseness" { COARSENESS_CAP } else { 0.0 });
        }
        out.flag("no_neighbourhoods");
        out.flag("coarseness_capped");
        return out;
    }
    // (level, p, s) for occupied levels
    let occupied: Vec<(f64, f64, f64)> =
        t.n.iter()
            .zip(&t.s)
            .enumerate()
            .filter(|(_, (&n, _))| n > 0.0)
            .map(|(k, (&n, &s))| ((k + 1) as f64, n / nv, s))
            .collect();
    let ngp = occupied.len() as f64;
    let ps: f64 = occupied.iter().map(|&(_, p, s)| p * s).sum();
    let s_total: f64 = occupied.iter().map(|&(_, _, s)| s).sum();

    let coarseness = if ps > 0.0 {
        (1.0 / ps).min(COARSENESS_CAP)
    } else {
        COARSENESS_CAP
    };
    if coarseness >= COARSENESS_CAP {
        out.flag("coarseness_capped");
    }
    let mut spread = 0.0;
    let mut busy_den = 0.0;
    let mut complexity = 0.0;
    let mut strength_num = 0.0;
    for &(i, pi, si) in &occupied {
        for &(j, pj, sj) in &occupied {
            let d = i - j;
            spread += pi * pj * d * d;
            busy_den += (i * pi - j * pj).abs();
            complexity += d.abs() * (pi * si + pj * sj) / (pi + pj);
            strength_num += (pi + pj) * d * d;
        }
    }
    let contrast = if ngp > 1.0 {
        spread / (ngp * (ngp - 1.0)) * s_total / nv
    } else {
        0.0
    };
    let busyness = if busy_den > 0.0 { ps / busy_den } else { 0.0 };
    let strength = if s_total > 0.0 { strength_num / s_total } else { 0.0 };
    out.push("coarseness", coarseness);
    out.push("contrast", contrast);
    out.push("busyness", busyness);
    out.push("complexity", complexity / nv);
    out.push("strength", strength);
    out
}

pub fn ngtdm_features(disc: &DiscretizedRoi) -> FeatureSet {
    ngtdm_features_from_table(&ngtdm_table(disc))
}
