//! Grey level co-occurrence matrices over the 13 unique 3D directions at
//! distance 1. Features are computed per direction and averaged.

use super::{DiscretizedRoi, FeatureSet};
use crate::error::{Error, Result};

/// One representative of each ± pair of the 26 neighbour offsets.
pub const GLCM_DIRECTIONS: [[i64; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [-1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, 1],
    [1, 1, 1],
    [-1, 1, 1],
    [1, -1, 1],
    [-1, -1, 1],
];

/// Symmetric co-occurrence counts for each direction (row-major n_bins²).
pub fn glcm_matrices(disc: &DiscretizedRoi) -> Vec<Vec<f64>> {
    let ng = disc.n_bins() as usize;
    GLCM_DIRECTIONS
        .iter()
        .map(|&d| {
            let mut m = vec![0.0; ng * ng];
            for (i, &a) in disc.levels().iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let b = disc.level_at_offset(i, d);
                if b == 0 {
                    continue;
                }
                let (a, b) = (a as usize - 1, b as usize - 1);
                m[a * ng + b] += 1.0;
                m[b * ng + a] += 1.0;
            }
            m
        })
        .collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

/// Features of one co-occurrence count matrix (levels 1..=ng).
///
/// Returns `None` for an empty matrix. A zero-variance marginal makes the
/// correlation 1, reported through `flags`.
pub fn glcm_features_from_matrix(
    counts: &[f64],
    ng: usize,
    flags: &mut Vec<&'static str>,
) -> Option<Vec<(&'static str, f64)>> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let p: Vec<f64> = counts.iter().map(|c| c / total).collect();
    let level = |k: usize| (k + 1) as f64;

    let mut px = vec![0.0; ng];
    let mut p_diff = vec![0.0; ng];
    let mut p_sum = vec![0.0; 2 * ng + 1];
    for i in 0..ng {
        for j in 0..ng {
            let v = p[i * ng + j];
            px[i] += v;
            p_diff[i.abs_diff(j)] += v;
            p_sum[i + j + 2] += v;
        }
    }
    // symmetric, so the column marginal equals px
    let mu: f64 = (0..ng).map(|i| level(i) * px[i]).sum();
    let var: f64 = (0..ng).map(|i| (level(i) - mu).powi(2) * px[i]).sum();

    let mut joint_max = 0.0f64;
    let mut joint_var = 0.0;
    let mut energy = 0.0;
    let mut contrast = 0.0;
    let mut dissimilarity = 0.0;
    let mut inv_diff = 0.0;
    let mut inv_diff_norm = 0.0;
    let mut inv_diff_mom = 0.0;
    let mut inv_diff_mom_norm = 0.0;
    let mut auto_corr = 0.0;
    let mut clust_tend = 0.0;
    let mut clust_shade = 0.0;
    let mut clust_prom = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    let ngf = ng as f64;
    for i in 0..ng {
        for j in 0..ng {
            let v = p[i * ng + j];
            let (li, lj) = (level(i), level(j));
            let d = li - lj;
            let s = li + lj - 2.0 * mu;
            let pxy = px[i] * px[j];
            if pxy > 0.0 {
                hxy2 -= pxy * pxy.log2();
                if v > 0.0 {
                    hxy1 -= v * pxy.log2();
                }
            }
            if v == 0.0 {
                continue;
            }
            joint_max = joint_max.max(v);
            joint_var += (li - mu).powi(2) * v;
            energy += v * v;
            contrast += d * d * v;
            dissimilarity += d.abs() * v;
            inv_diff += v / (1.0 + d.abs());
            inv_diff_norm += v / (1.0 + d.abs() / ngf);
            inv_diff_mom += v / (1.0 + d * d);
            inv_diff_mom_norm += v / (1.0 + d * d / (ngf * ngf));
            auto_corr += li * lj * v;
            clust_tend += s * s * v;
            clust_shade += s * s * s * v;
            clust_prom += s * s * s * s * v;
        }
    }

    let diff_avg: f64 = p_diff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let diff_var: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - diff_avg).powi(2) * v)
        .sum();
    let sum_avg: f64 = p_sum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sum_var: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - sum_avg).powi(2) * v)
        .sum();
    let inv_var: f64 = p_diff.iter().enumerate().skip(1).map(|(k, v)| v / (k * k) as f64).sum();

    let correlation = if var > 0.0 {
        (auto_corr - mu * mu) / var
    } else {
        flags.push("correlation_zero_variance");
        1.0
    };
    let hx = entropy(&px);
    let hxy = entropy(&p);
    let info_corr1 = if hx > 0.0 { (hxy - hxy1) / hx } else { 0.0 };
    let info_corr2 = (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt();

    Some(vec![
        ("joint_max", joint_max),
        ("joint_average", mu),
        ("joint_var", joint_var),
        ("joint_entropy", hxy),
        ("diff_average", diff_avg),
        ("diff_var", diff_var),
        ("diff_entropy", entropy(&p_diff)),
        ("sum_average", sum_avg),
        ("sum_var", sum_var),
        ("sum_entropy", entropy(&p_sum)),
        ("energy", energy),
        ("contrast", contrast),
        ("dissimilarity", dissimilarity),
        ("inv_diff", inv_diff),
        ("inv_diff_norm", inv_diff_norm),
        ("inv_diff_mom", inv_diff_mom),
        ("inv_diff_mom_norm", inv_diff_mom_norm),
        ("inv_var", inv_var),
        ("correlation1", correlation),
        ("auto_corr", auto_corr),
        ("clust_tend", clust_tend),
        ("clust_shade", clust_shade),
        ("clust_prom", clust_prom),
        ("info_corr1", info_corr1),
        ("info_corr2", info_corr2),
    ])
}

/// Direction-averaged GLCM features; directions without pairs are skipped.
pub fn glcm_features(disc: &DiscretizedRoi) -> Result<FeatureSet> {
    let ng = disc.n_bins() as usize;
    let mut flags = Vec::new();
    let per_direction: Vec<_> = glcm_matrices(disc)
        .iter()
        .filter_map(|m| glcm_features_from_matrix(m, ng, &mut flags))
        .collect();
    let mut out = average_features(&per_direction)
        .ok_or_else(|| Error::Undefined("GLCM: no neighbouring roi voxel pairs".into()))?;
    for f in flags {
        out.flag(f);
    }
    Ok(out)
}

pub(crate) fn average_features(per_direction: &[Vec<(&'static str, f64)>]) -> Option<FeatureSet> {
    let first = per_direction.first()?;
    let n = per_direction.len() as f64;
    let mut out = FeatureSet::default();
    for (k, (name, _)) in first.iter().enumerate() {
        let mean = per_direction.iter().map(|d| d[k].1).sum::<f64>() / n;
        out.push(name, mean);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stripe(dims: [usize; 3]) -> DiscretizedRoi {
        let levels = (0..dims.iter().product::<usize>())
            .map(|i| if (i % dims[0]).is_multiple_of(2) { 1 } else { 2 })
            .collect();
        DiscretizedRoi::from_levels(dims, levels, 2).unwrap()
    }

    #[test]
    fn checkerboard_direction_has_negative_unit_correlation() {
        let disc = stripe([6, 1, 1]);
        let mats = glcm_matrices(&disc);
        // x direction: 5 pairs, all (1,2)/(2,1)
        assert_eq!(mats[0], vec![0.0, 5.0, 5.0, 0.0]);
        let mut flags = Vec::new();
        let f = glcm_features_from_matrix(&mats[0], 2, &mut flags).unwrap();
        let corr = f.iter().find(|(n, _)| *n == "correlation1").unwrap().1;
        assert!((corr + 1.0).abs() < 1e-12);
        assert!(flags.is_empty());
    }

    #[test]
    fn constant_roi_has_flagged_unit_correlation() {
        let disc = DiscretizedRoi::from_levels([3, 3, 3], vec![1; 27], 4).unwrap();
        let f = glcm_features(&disc).unwrap();
        assert_eq!(f.get("correlation1"), Some(1.0));
        assert!(f.flags.iter().any(|s| s.contains("correlation")));
        assert!(f.values.iter().all(|(_, v)| v.is_finite()));
    }

    #[test]
    fn matrices_are_symmetric_with_pair_totals() {
        let disc = stripe([4, 3, 2]);
        for (m, d) in glcm_matrices(&disc).iter().zip(GLCM_DIRECTIONS) {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(m[i * 2 + j], m[j * 2 + i]);
                }
            }
            // full box: pairs = Π (n_a − |d_a|), each counted twice
            let pairs: i64 = (0..3).map(|a| [4i64, 3, 2][a] - d[a].abs()).product();
            assert_eq!(m.iter().sum::<f64>(), 2.0 * pairs as f64);
        }
    }

    #[test]
    fn isolated_voxels_are_undefined() {
        let mut levels = vec![0u16; 27];
        levels[0] = 1;
        levels[26] = 2;
        let disc = DiscretizedRoi::from_levels([3, 3, 3], levels, 2).unwrap();
        assert!(glcm_features(&disc).is_err());
    }
}
