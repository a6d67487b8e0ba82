//! Neighbouring grey-level dependence matrix (coarseness 0, distance 1).

use super::glrlm::marginal_moments;
use super::{DiscretizedRoi, FeatureSet};
use crate::volume::OFFSETS_26;

/// `m[level − 1][k]` counts ROI voxels whose 26-neighbourhood holds `k`
/// voxels of the same level.
pub fn ngldm_matrix(disc: &DiscretizedRoi) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; 27]; disc.n_bins() as usize];
    for (i, &l) in disc.levels().iter().enumerate() {
        if l == 0 {
            continue;
        }
        let k = OFFSETS_26.iter().filter(|&&o| disc.level_at_offset(i, o) == l).count();
        m[l as usize - 1][k] += 1.0;
    }
    m
}

/// Dependence-weighted emphases use `j = k + 1` so isolated voxels count.
pub fn ngldm_features_from_matrix(m: &[Vec<f64>], n_voxels: usize) -> FeatureSet {
    let mut out = FeatureSet::default();
    let total: f64 = m.iter().flatten().sum();
    let mut acc = [0.0f64; 8];
    let mut by_level = vec![0.0; m.len()];
    let mut by_dep = vec![0.0; m.first().map_or(0, Vec::len)];
    let mut energy = 0.0;
    for (gi, row) in m.iter().enumerate() {
        let i = (gi + 1) as f64;
        for (ki, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let j = (ki + 1) as f64;
            let (i2, j2) = (i * i, j * j);
            acc[0] += c / j2;
            acc[1] += c * j2;
            acc[2] += c / i2;
            acc[3] += c * i2;
            acc[4] += c / (i2 * j2);
            acc[5] += c * i2 / j2;
            acc[6] += c * j2 / i2;
            acc[7] += c * i2 * j2;
            by_level[gi] += c;
            by_dep[ki] += c;
            energy += (c / total).powi(2);
        }
    }
    let glnu = by_level.iter().map(|v| v * v).sum::<f64>() / total;
    let dcnu = by_dep.iter().map(|v| v * v).sum::<f64>() / total;
    let (gl_var, dc_var, entr) = marginal_moments(m, total);
    let names = ["lde", "hde", "lgce", "hgce", "ldlge", "ldhge", "hdlge", "hdhge"];
    for (name, v) in names.iter().zip(acc) {
        out.push(name, v / total);
    }
    out.push("glnu", glnu);
    out.push("glnu_norm", glnu / total);
    out.push("dcnu", dcnu);
    out.push("dcnu_norm", dcnu / total);
    out.push("dc_perc", total / n_voxels as f64);
    out.push("gl_var", gl_var);
    out.push("dc_var", dc_var);
    out.push("dc_entr", entr);
    out.push("dc_energy", energy);
    out
}

pub fn ngldm_features(disc: &DiscretizedRoi) -> FeatureSet {
    ngldm_features_from_matrix(&ngldm_matrix(disc), disc.voxel_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_voxel() {
        let mut levels = vec![0u16; 27];
        levels[13] = 3;
        let disc = DiscretizedRoi::from_levels([3, 3, 3], levels, 4).unwrap();
        assert_eq!(ngldm_matrix(&disc)[2][0], 1.0);
        assert!((ngldm_features(&disc).get("lgce").unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn constant_cube() {
        let disc = DiscretizedRoi::from_levels([3, 3, 3], vec![1; 27], 4).unwrap();
        let m = ngldm_matrix(&disc);
        assert_eq!(m[0][26], 1.0);
        assert_eq!(m[0][7], 8.0);
        assert_eq!(ngldm_features(&disc).get("lgce"), Some(1.0));
    }
}
