//! Grey level run length matrices along the 13 GLCM directions.

use super::glcm::{average_features, GLCM_DIRECTIONS};
use super::{DiscretizedRoi, FeatureSet};
use crate::error::{Error, Result};

/// Run counts per direction, indexed `[level − 1][length − 1]`.
pub fn glrlm_matrices(disc: &DiscretizedRoi) -> Vec<Vec<Vec<f64>>> {
    let ng = disc.n_bins() as usize;
    let max_len = disc.dims().into_iter().max().unwrap_or(1);
    GLCM_DIRECTIONS
        .iter()
        .map(|&d| {
            let back = [-d[0], -d[1], -d[2]];
            let mut m = vec![vec![0.0; max_len]; ng];
            for (i, &a) in disc.levels().iter().enumerate() {
                if a == 0 || disc.level_at_offset(i, back) == a {
                    continue;
                }
                let mut len = 1;
                let mut cur = i;
                while let Some(next) = disc.offset_index(cur, d) {
                    if disc.levels()[next] != a {
                        break;
                    }
                    len += 1;
                    cur = next;
                }
                m[a as usize - 1][len - 1] += 1.0;
            }
            m
        })
        .collect()
}

/// Features of one run-length matrix; `n_voxels` is the ROI size.
pub fn run_length_features(m: &[Vec<f64>], n_voxels: usize) -> Option<Vec<(&'static str, f64)>> {
    let ns: f64 = m.iter().flatten().sum();
    if ns <= 0.0 {
        return None;
    }
    let mut sre = 0.0;
    let mut lre = 0.0;
    let mut lgre = 0.0;
    let mut hgre = 0.0;
    let mut srlge = 0.0;
    let mut srhge = 0.0;
    let mut lrlge = 0.0;
    let mut lrhge = 0.0;
    let n_len = m.first().map_or(0, Vec::len);
    let mut by_level = vec![0.0; m.len()];
    let mut by_len = vec![0.0; n_len];
    for (gi, row) in m.iter().enumerate() {
        let i = (gi + 1) as f64;
        for (ji, &r) in row.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let j = (ji + 1) as f64;
            sre += r / (j * j);
            lre += r * j * j;
            lgre += r / (i * i);
            hgre += r * i * i;
            srlge += r / (i * i * j * j);
            srhge += r * i * i / (j * j);
            lrlge += r * j * j / (i * i);
            lrhge += r * i * i * j * j;
            by_level[gi] += r;
            by_len[ji] += r;
        }
    }
    let glnu: f64 = by_level.iter().map(|v| v * v).sum::<f64>() / ns;
    let rlnu: f64 = by_len.iter().map(|v| v * v).sum::<f64>() / ns;
    let (gl_var, rl_var, rl_entr) = marginal_moments(m, ns);
    Some(vec![
        ("sre", sre / ns),
        ("lre", lre / ns),
        ("lgre", lgre / ns),
        ("hgre", hgre / ns),
        ("srlge", srlge / ns),
        ("srhge", srhge / ns),
        ("lrlge", lrlge / ns),
        ("lrhge", lrhge / ns),
        ("glnu", glnu),
        ("glnu_norm", glnu / ns),
        ("rlnu", rlnu),
        ("rlnu_norm", rlnu / ns),
        ("r_perc", ns / n_voxels as f64),
        ("gl_var", gl_var),
        ("rl_var", rl_var),
        ("rl_entr", rl_entr),
    ])
}

/// Grey-level variance, second-index variance and joint entropy of a
/// `[level][k]` count matrix with 1-based indices.
pub(crate) fn marginal_moments(m: &[Vec<f64>], total: f64) -> (f64, f64, f64) {
    let mut mu_i = 0.0;
    let mut mu_j = 0.0;
    let mut entr = 0.0;
    for (gi, row) in m.iter().enumerate() {
        for (ji, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let p = c / total;
            mu_i += (gi + 1) as f64 * p;
            mu_j += (ji + 1) as f64 * p;
            entr -= p * p.log2();
        }
    }
    let mut var_i = 0.0;
    let mut var_j = 0.0;
    for (gi, row) in m.iter().enumerate() {
        for (ji, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let p = c / total;
            var_i += ((gi + 1) as f64 - mu_i).powi(2) * p;
            var_j += ((ji + 1) as f64 - mu_j).powi(2) * p;
        }
    }
    (var_i, var_j, entr)
}

pub fn glrlm_features(disc: &DiscretizedRoi) -> Result<FeatureSet> {
    let n = disc.voxel_count();
    let per_direction: Vec<_> = glrlm_matrices(disc)
        .iter()
        .filter_map(|m| run_length_features(m, n))
        .collect();
    average_features(&per_direction).ok_or_else(|| Error::Undefined("GLRLM: empty roi".into()))
}
