//! Brute-force reference implementations shared by the integration tests.
//! They work on coordinate maps and explicit pair loops rather than the
//! library's flat-index arithmetic.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use hn_radiomics::survival::SurvivalRecord;

pub type Voxel = (i64, i64, i64);

/// ROI as coordinate → grey level (levels ≥ 1).
pub struct Roi {
    pub levels: HashMap<Voxel, u16>,
    pub n_bins: usize,
}

fn neighbours(v: Voxel) -> impl Iterator<Item = Voxel> {
    (-1..=1).flat_map(move |dz| {
        (-1..=1).flat_map(move |dy| {
            (-1..=1).filter_map(move |dx| (dx != 0 || dy != 0 || dz != 0).then_some((v.0 + dx, v.1 + dy, v.2 + dz)))
        })
    })
}

impl Roi {
    /// From a dense x-fastest grid where 0 is outside.
    pub fn from_grid(dims: [usize; 3], grid: &[u16], n_bins: usize) -> Self {
        let mut levels = HashMap::new();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let l = grid[x + dims[0] * (y + dims[1] * z)];
                    if l > 0 {
                        levels.insert((x as i64, y as i64, z as i64), l);
                    }
                }
            }
        }
        Self { levels, n_bins }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    fn sorted(&self) -> Vec<(Voxel, u16)> {
        let mut v: Vec<_> = self.levels.iter().map(|(&k, &l)| (k, l)).collect();
        v.sort();
        v
    }
}

fn log2(x: f64) -> f64 {
    x.ln() / std::f64::consts::LN_2
}

fn shannon(p: impl Iterator<Item = f64>) -> f64 {
    p.filter(|&v| v > 0.0).map(|v| -v * log2(v)).sum()
}

/// Thirteen direction representatives: first non-zero component positive.
fn half_directions() -> Vec<Voxel> {
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let first = [dz, dy, dx].into_iter().find(|&c| c != 0);
                if first == Some(1) {
                    out.push((dx, dy, dz));
                }
            }
        }
    }
    assert_eq!(out.len(), 13);
    out
}

/// Joint probabilities of one direction as a map over (i, j), both orders.
fn glcm_probabilities(roi: &Roi, d: Voxel) -> Option<BTreeMap<(usize, usize), f64>> {
    let mut counts = BTreeMap::<(usize, usize), f64>::new();
    for (v, a) in roi.sorted() {
        if let Some(&b) = roi.levels.get(&(v.0 + d.0, v.1 + d.1, v.2 + d.2)) {
            *counts.entry((a as usize, b as usize)).or_default() += 1.0;
            *counts.entry((b as usize, a as usize)).or_default() += 1.0;
        }
    }
    let total: f64 = counts.values().sum();
    (total > 0.0).then(|| counts.into_iter().map(|(k, c)| (k, c / total)).collect())
}

fn glcm_direction_features(p: &BTreeMap<(usize, usize), f64>, ng: usize) -> BTreeMap<&'static str, f64> {
    let get = |i: usize, j: usize| p.get(&(i, j)).copied().unwrap_or(0.0);
    let levels: Vec<usize> = (1..=ng).collect();
    let px: Vec<f64> = levels
        .iter()
        .map(|&i| levels.iter().map(|&j| get(i, j)).sum())
        .collect();
    let mu: f64 = levels.iter().map(|&i| i as f64 * px[i - 1]).sum();
    let sigma2: f64 = levels.iter().map(|&i| (i as f64 - mu).powi(2) * px[i - 1]).sum();
    let pdiff = |k: usize| -> f64 {
        let mut s = 0.0;
        for &i in &levels {
            for &j in &levels {
                if i.abs_diff(j) == k {
                    s += get(i, j);
                }
            }
        }
        s
    };
    let psum = |k: usize| -> f64 {
        let mut s = 0.0;
        for &i in &levels {
            for &j in &levels {
                if i + j == k {
                    s += get(i, j);
                }
            }
        }
        s
    };
    let diffs: Vec<f64> = (0..ng).map(pdiff).collect();
    let sums: Vec<f64> = (2..=2 * ng).map(psum).collect();
    let diff_avg: f64 = diffs.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sum_avg: f64 = sums.iter().enumerate().map(|(k, v)| (k + 2) as f64 * v).sum();

    let sum_ij = |f: &dyn Fn(f64, f64, f64) -> f64| -> f64 {
        let mut s = 0.0;
        for &i in &levels {
            for &j in &levels {
                let v = get(i, j);
                if v > 0.0 {
                    s += f(i as f64, j as f64, v);
                }
            }
        }
        s
    };
    let n = ng as f64;
    let hxy = shannon(p.values().copied());
    let hx = shannon(px.iter().copied());
    let hxy1 = sum_ij(&|i, j, v| -v * log2(px[i as usize - 1] * px[j as usize - 1]));
    let mut hxy2 = 0.0;
    for &i in &levels {
        for &j in &levels {
            let q = px[i - 1] * px[j - 1];
            if q > 0.0 {
                hxy2 -= q * log2(q);
            }
        }
    }
    let covariance = sum_ij(&|i, j, v| (i - mu) * (j - mu) * v);
    let mut f = BTreeMap::new();
    f.insert("joint_max", p.values().cloned().fold(0.0, f64::max));
    f.insert("joint_average", sum_ij(&|i, _, v| i * v));
    f.insert("joint_var", sum_ij(&|i, _, v| (i - mu).powi(2) * v));
    f.insert("joint_entropy", hxy);
    f.insert("diff_average", diff_avg);
    f.insert(
        "diff_var",
        diffs
            .iter()
            .enumerate()
            .map(|(k, v)| (k as f64 - diff_avg).powi(2) * v)
            .sum(),
    );
    f.insert("diff_entropy", shannon(diffs.iter().copied()));
    f.insert("sum_average", sum_avg);
    f.insert(
        "sum_var",
        sums.iter()
            .enumerate()
            .map(|(k, v)| ((k + 2) as f64 - sum_avg).powi(2) * v)
            .sum(),
    );
    f.insert("sum_entropy", shannon(sums.iter().copied()));
    f.insert("energy", sum_ij(&|_, _, v| v * v));
    f.insert("contrast", sum_ij(&|i, j, v| (i - j).powi(2) * v));
    f.insert("dissimilarity", sum_ij(&|i, j, v| (i - j).abs() * v));
    f.insert("inv_diff", sum_ij(&|i, j, v| v / (1.0 + (i - j).abs())));
    f.insert("inv_diff_norm", sum_ij(&|i, j, v| v / (1.0 + (i - j).abs() / n)));
    f.insert("inv_diff_mom", sum_ij(&|i, j, v| v / (1.0 + (i - j).powi(2))));
    f.insert(
        "inv_diff_mom_norm",
        sum_ij(&|i, j, v| v / (1.0 + (i - j).powi(2) / (n * n))),
    );
    f.insert(
        "inv_var",
        sum_ij(&|i, j, v| if i != j { v / (i - j).powi(2) } else { 0.0 }),
    );
    f.insert("correlation1", if sigma2 > 0.0 { covariance / sigma2 } else { 1.0 });
    f.insert("auto_corr", sum_ij(&|i, j, v| i * j * v));
    f.insert("clust_tend", sum_ij(&|i, j, v| (i + j - 2.0 * mu).powi(2) * v));
    f.insert("clust_shade", sum_ij(&|i, j, v| (i + j - 2.0 * mu).powi(3) * v));
    f.insert("clust_prom", sum_ij(&|i, j, v| (i + j - 2.0 * mu).powi(4) * v));
    f.insert("info_corr1", if hx > 0.0 { (hxy - hxy1) / hx } else { 0.0 });
    f.insert("info_corr2", (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt());
    f
}

/// Mean over the directions that have at least one pair.
pub fn glcm_oracle(roi: &Roi) -> Option<BTreeMap<&'static str, f64>> {
    let per: Vec<_> = half_directions()
        .into_iter()
        .filter_map(|d| glcm_probabilities(roi, d))
        .map(|p| glcm_direction_features(&p, roi.n_bins))
        .collect();
    let first = per.first()?;
    Some(
        first
            .keys()
            .map(|&k| (k, per.iter().map(|f| f[k]).sum::<f64>() / per.len() as f64))
            .collect(),
    )
}

/// Equal-level zones by depth-first flood fill over 26-neighbours.
pub fn zones(roi: &Roi) -> Vec<(u16, Vec<Voxel>)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (v, l) in roi.sorted() {
        if !seen.insert(v) {
            continue;
        }
        let mut stack = vec![v];
        let mut members = Vec::new();
        while let Some(u) = stack.pop() {
            members.push(u);
            for w in neighbours(u) {
                if roi.levels.get(&w) == Some(&l) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        out.push((l, members));
    }
    out
}

/// Smallest Chebyshev distance from `v` to a position outside the ROI.
pub fn border_distance(roi: &Roi, v: Voxel) -> i64 {
    for r in 1i64.. {
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs().max(dy.abs()).max(dz.abs()) == r
                        && !roi.levels.contains_key(&(v.0 + dx, v.1 + dy, v.2 + dz))
                    {
                        return r;
                    }
                }
            }
        }
    }
    unreachable!()
}

/// Counts keyed (level, k) for size or distance zones.
pub fn zone_counts(roi: &Roi, distance: bool) -> BTreeMap<(usize, usize), f64> {
    let mut m = BTreeMap::new();
    for (l, members) in zones(roi) {
        let k = if distance {
            members.iter().map(|&v| border_distance(roi, v)).min().unwrap() as usize
        } else {
            members.len()
        };
        *m.entry((l as usize, k)).or_insert(0.0) += 1.0;
    }
    m
}

/// Sixteen zone features from `(level, k)` counts, with the library's names.
pub fn zone_oracle(
    counts: &BTreeMap<(usize, usize), f64>,
    n_voxels: usize,
    distance: bool,
) -> BTreeMap<&'static str, f64> {
    let nz: f64 = counts.values().sum();
    let mean = |f: &dyn Fn(f64, f64) -> f64| {
        counts
            .iter()
            .map(|(&(i, k), &c)| c * f(i as f64, k as f64))
            .sum::<f64>()
            / nz
    };
    let mut by_level = BTreeMap::<usize, f64>::new();
    let mut by_k = BTreeMap::<usize, f64>::new();
    for (&(i, k), &c) in counts {
        *by_level.entry(i).or_default() += c;
        *by_k.entry(k).or_default() += c;
    }
    let glnu = by_level.values().map(|v| v * v).sum::<f64>() / nz;
    let knu = by_k.values().map(|v| v * v).sum::<f64>() / nz;
    let mu_i = mean(&|i, _| i);
    let mu_k = mean(&|_, k| k);
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
        mean(&|_, k| 1.0 / (k * k)),
        mean(&|_, k| k * k),
        mean(&|i, _| 1.0 / (i * i)),
        mean(&|i, _| i * i),
        mean(&|i, k| 1.0 / (i * i * k * k)),
        mean(&|i, k| i * i / (k * k)),
        mean(&|i, k| k * k / (i * i)),
        mean(&|i, k| i * i * k * k),
        glnu,
        glnu / nz,
        knu,
        knu / nz,
        nz / n_voxels as f64,
        mean(&|i, _| (i - mu_i).powi(2)),
        mean(&|_, k| (k - mu_k).powi(2)),
        shannon(counts.values().map(|c| c / nz)),
    ];
    names.into_iter().zip(values).collect()
}

/// NGTDM features with isolated voxels left out and coarseness capped.
pub fn ngtdm_oracle(roi: &Roi) -> BTreeMap<&'static str, f64> {
    let cap = 1e6;
    let mut n = BTreeMap::<usize, f64>::new();
    let mut s = BTreeMap::<usize, f64>::new();
    for (v, l) in roi.sorted() {
        let around: Vec<f64> = neighbours(v)
            .filter_map(|w| roi.levels.get(&w))
            .map(|&x| x as f64)
            .collect();
        if around.is_empty() {
            continue;
        }
        let avg = around.iter().sum::<f64>() / around.len() as f64;
        *n.entry(l as usize).or_default() += 1.0;
        *s.entry(l as usize).or_default() += (l as f64 - avg).abs();
    }
    let nv: f64 = n.values().sum();
    let mut f = BTreeMap::new();
    if nv == 0.0 {
        f.insert("coarseness", cap);
        for k in ["contrast", "busyness", "complexity", "strength"] {
            f.insert(k, 0.0);
        }
        return f;
    }
    let lv: Vec<(f64, f64, f64)> = n.iter().map(|(&i, &c)| (i as f64, c / nv, s[&i])).collect();
    let ngp = lv.len() as f64;
    let ps: f64 = lv.iter().map(|x| x.1 * x.2).sum();
    let st: f64 = lv.iter().map(|x| x.2).sum();
    type Level = (f64, f64, f64);
    let pairs =
        |g: &dyn Fn(&Level, &Level) -> f64| -> f64 { lv.iter().map(|a| lv.iter().map(|b| g(a, b)).sum::<f64>()).sum() };
    let busy = pairs(&|a, b| (a.0 * a.1 - b.0 * b.1).abs());
    f.insert("coarseness", if ps > 0.0 { (1.0 / ps).min(cap) } else { cap });
    f.insert(
        "contrast",
        if ngp > 1.0 {
            pairs(&|a, b| a.1 * b.1 * (a.0 - b.0).powi(2)) / (ngp * (ngp - 1.0)) * st / nv
        } else {
            0.0
        },
    );
    f.insert("busyness", if busy > 0.0 { ps / busy } else { 0.0 });
    f.insert(
        "complexity",
        pairs(&|a, b| (a.0 - b.0).abs() * (a.1 * a.2 + b.1 * b.2) / (a.1 + b.1)) / nv,
    );
    f.insert(
        "strength",
        if st > 0.0 {
            pairs(&|a, b| (a.1 + b.1) * (a.0 - b.0).powi(2)) / st
        } else {
            0.0
        },
    );
    f
}

/// NGLDM features; dependence `j` = same-level neighbours + 1.
pub fn ngldm_oracle(roi: &Roi) -> BTreeMap<&'static str, f64> {
    let mut m = BTreeMap::<(usize, usize), f64>::new();
    for (v, l) in roi.sorted() {
        let same = neighbours(v).filter(|w| roi.levels.get(w) == Some(&l)).count();
        *m.entry((l as usize, same + 1)).or_default() += 1.0;
    }
    let total: f64 = m.values().sum();
    let mean =
        |f: &dyn Fn(f64, f64) -> f64| m.iter().map(|(&(i, j), &c)| c * f(i as f64, j as f64)).sum::<f64>() / total;
    let mut by_level = BTreeMap::<usize, f64>::new();
    let mut by_dep = BTreeMap::<usize, f64>::new();
    for (&(i, j), &c) in &m {
        *by_level.entry(i).or_default() += c;
        *by_dep.entry(j).or_default() += c;
    }
    let glnu = by_level.values().map(|v| v * v).sum::<f64>() / total;
    let dcnu = by_dep.values().map(|v| v * v).sum::<f64>() / total;
    let mu_i = mean(&|i, _| i);
    let mu_j = mean(&|_, j| j);
    let mut f = BTreeMap::new();
    f.insert("lde", mean(&|_, j| 1.0 / (j * j)));
    f.insert("hde", mean(&|_, j| j * j));
    f.insert("lgce", mean(&|i, _| 1.0 / (i * i)));
    f.insert("hgce", mean(&|i, _| i * i));
    f.insert("ldlge", mean(&|i, j| 1.0 / (i * i * j * j)));
    f.insert("ldhge", mean(&|i, j| i * i / (j * j)));
    f.insert("hdlge", mean(&|i, j| j * j / (i * i)));
    f.insert("hdhge", mean(&|i, j| i * i * j * j));
    f.insert("glnu", glnu);
    f.insert("glnu_norm", glnu / total);
    f.insert("dcnu", dcnu);
    f.insert("dcnu_norm", dcnu / total);
    f.insert("dc_perc", total / roi.len() as f64);
    f.insert("gl_var", mean(&|i, _| (i - mu_i).powi(2)));
    f.insert("dc_var", mean(&|_, j| (j - mu_j).powi(2)));
    f.insert("dc_entr", shannon(m.values().map(|c| c / total)));
    f.insert("dc_energy", m.values().map(|c| (c / total).powi(2)).sum());
    f
}

/// Harrell's C-index by enumerating every ordered pair.
pub fn cindex_pairs(risks: &[f64], records: &[SurvivalRecord]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..risks.len() {
        for j in 0..risks.len() {
            if records[i].event && records[i].time < records[j].time {
                den += 1.0;
                if risks[i] > risks[j] {
                    num += 1.0;
                } else if risks[i] == risks[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// `|a − b| ≤ tol · max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Prints the criterion line and returns `pass`.
pub fn report(id: u32, title: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {id} {}: {title}; {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}
