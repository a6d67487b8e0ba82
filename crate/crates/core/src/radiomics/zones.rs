//! Zone-based texture: size zone (GLSZM) and distance zone (GLDZM) matrices.
//!
//! A zone is a maximal 26-connected set of ROI voxels with equal grey level.

use std::collections::VecDeque;

use super::glrlm::marginal_moments;
use super::{DiscretizedRoi, FeatureSet};
use crate::components::{components_by_key, Component, Connectivity};
use crate::volume::OFFSETS_26;

/// Zone counts indexed `[level − 1][k − 1]`, where k is a zone size or distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMatrix {
    pub counts: Vec<Vec<f64>>,
}

impl ZoneMatrix {
    fn new(ng: usize, width: usize) -> Self {
        Self {
            counts: vec![vec![0.0; width.max(1)]; ng],
        }
    }

    fn add(&mut self, level: u16, k: usize) {
        let row = &mut self.counts[level as usize - 1];
        if row.len() < k {
            row.resize(k, 0.0);
        }
        row[k - 1] += 1.0;
        let width = row.len();
        for r in &mut self.counts {
            r.resize(width.max(r.len()), 0.0);
        }
    }

    pub fn zone_count(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }
}

fn zones(disc: &DiscretizedRoi) -> Vec<Component> {
    components_by_key(disc.dims(), disc.levels(), Connectivity::TwentySix)
}

pub fn glszm_matrix(disc: &DiscretizedRoi) -> ZoneMatrix {
    let mut m = ZoneMatrix::new(disc.n_bins() as usize, 1);
    for z in zones(disc) {
        m.add(z.key, z.voxels.len());
    }
    m
}

/// Chebyshev distance of every ROI voxel to the nearest non-ROI voxel
/// (voxels beyond the grid count as non-ROI); 0 outside the ROI.
pub fn distance_map(disc: &DiscretizedRoi) -> Vec<u32> {
    let levels = disc.levels();
    let mut dist = vec![0u32; levels.len()];
    let mut queue = VecDeque::new();
    for (i, &l) in levels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let at_border = OFFSETS_26
            .iter()
            .any(|&o| disc.offset_index(i, o).is_none_or(|j| levels[j] == 0));
        if at_border {
            dist[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &o in &OFFSETS_26 {
            if let Some(j) = disc.offset_index(i, o) {
                if levels[j] != 0 && dist[j] == 0 {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
    }
    dist
}

pub fn gldzm_matrix(disc: &DiscretizedRoi) -> ZoneMatrix {
    let dist = distance_map(disc);
    let mut m = ZoneMatrix::new(disc.n_bins() as usize, 1);
    for z in zones(disc) {
        let d = z.voxels.iter().map(|&v| dist[v]).min().expect("zone is non-empty");
        m.add(z.key, d as usize);
    }
    m
}

/// Shared zone-matrix features. `short`/`long` name the second index
/// ("sz"/"lz" for sizes, "sd"/"ld" for distances) and `k` its marginal tag.
pub fn zone_features(m: &ZoneMatrix, n_voxels: usize, distance: bool) -> FeatureSet {
    let nz = m.zone_count();
    let mut out = FeatureSet::default();
    let mut small = 0.0;
    let mut large = 0.0;
    let mut lg = 0.0;
    let mut hg = 0.0;
    let mut s_lg = 0.0;
    let mut s_hg = 0.0;
    let mut l_lg = 0.0;
    let mut l_hg = 0.0;
    let width = m.counts.first().map_or(0, Vec::len);
    let mut by_level = vec![0.0; m.counts.len()];
    let mut by_k = vec![0.0; width];
    for (gi, row) in m.counts.iter().enumerate() {
        let i = (gi + 1) as f64;
        for (ki, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let k = (ki + 1) as f64;
            small += c / (k * k);
            large += c * k * k;
            lg += c / (i * i);
            hg += c * i * i;
            s_lg += c / (i * i * k * k);
            s_hg += c * i * i / (k * k);
            l_lg += c * k * k / (i * i);
            l_hg += c * i * i * k * k;
            by_level[gi] += c;
            by_k[ki] += c;
        }
    }
    let glnu = by_level.iter().map(|v| v * v).sum::<f64>() / nz;
    let knu = by_k.iter().map(|v| v * v).sum::<f64>() / nz;
    let (gl_var, k_var, entr) = marginal_moments(&m.counts, nz);
    let names: [&str; 16] = if distance {
        [
            "sde",
            "lde",
            "lgze",
            "hgze",
            "sdlge",
            "sdhge",
            "ldlge",
            "ldhge",
            "glnu",
            "glnu_norm",
            "zdnu",
            "zdnu_norm",
            "z_perc",
            "gl_var",
            "zd_var",
            "zd_entr",
        ]
    } else {
        [
            "sze",
            "lze",
            "lgze",
            "hgze",
            "szlge",
            "szhge",
            "lzlge",
            "lzhge",
            "glnu",
            "glnu_norm",
            "zsnu",
            "zsnu_norm",
            "z_perc",
            "gl_var",
            "zs_var",
            "zs_entr",
        ]
    };
    let values = [
        small / nz,
        large / nz,
        lg / nz,
        hg / nz,
        s_lg / nz,
        s_hg / nz,
        l_lg / nz,
        l_hg / nz,
        glnu,
        glnu / nz,
        knu,
        knu / nz,
        nz / n_voxels as f64,
        gl_var,
        k_var,
        entr,
    ];
    for (n, v) in names.iter().zip(values) {
        out.push(n, v);
    }
    out
}

pub fn glszm_features(disc: &DiscretizedRoi) -> FeatureSet {
    zone_features(&glszm_matrix(disc), disc.voxel_count(), false)
}

pub fn gldzm_features(disc: &DiscretizedRoi) -> FeatureSet {
    zone_features(&gldzm_matrix(disc), disc.voxel_count(), true)
}
