//! First-order statistics, intensity histogram and local intensity peaks.

use super::FeatureSet;
use crate::conventional::{sphere_mean, sphere_offsets, PEAK_SPHERE_RADIUS_MM};
use crate::error::{Error, Result};
use crate::volume::VoxelGrid;

/// Nearest-rank percentile of sorted data: element `ceil(p/100 · n) − 1`.
pub fn nearest_rank_percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(sorted.len() - 1)]
}

struct Moments {
    mean: f64,
    var: f64,
    skewness: f64,
    kurtosis: f64,
    degenerate: bool,
}

fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let degenerate = m2 <= (1e-12 * mean.abs().max(1.0)).powi(2);
    let (skewness, kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    Moments {
        mean,
        var: m2,
        skewness,
        kurtosis,
        degenerate,
    }
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn qcod(p25: f64, p75: f64) -> f64 {
    if p25 + p75 == 0.0 {
        0.0
    } else {
        (p75 - p25) / (p75 + p25)
    }
}

/// Statistics of raw intensities; zero variance yields skewness = kurtosis = 0
/// and the `zero_variance` flag.
pub fn statistics_features(values: &[f64]) -> FeatureSet {
    let mut out = FeatureSet::default();
    let m = moments(values);
    let s = sorted(values);
    let n = values.len() as f64;
    let p10 = nearest_rank_percentile(&s, 10.0);
    let p25 = nearest_rank_percentile(&s, 25.0);
    let p75 = nearest_rank_percentile(&s, 75.0);
    let p90 = nearest_rank_percentile(&s, 90.0);
    let median = nearest_rank_percentile(&s, 50.0);
    let energy: f64 = values.iter().map(|v| v * v).sum();
    let mad = values.iter().map(|v| (v - m.mean).abs()).sum::<f64>() / n;
    let medad = values.iter().map(|v| (v - median).abs()).sum::<f64>() / n;
    let cov = if m.mean == 0.0 { 0.0 } else { m.var.sqrt() / m.mean };
    out.push("mean", m.mean);
    out.push("var", m.var);
    out.push("skewness", m.skewness);
    out.push("kurtosis", m.kurtosis);
    out.push("median", median);
    out.push("min", s[0]);
    out.push("p10", p10);
    out.push("p90", p90);
    out.push("max", s[s.len() - 1]);
    out.push("iqr", p75 - p25);
    out.push("range", s[s.len() - 1] - s[0]);
    out.push("mad", mad);
    out.push("medad", medad);
    out.push("cov", cov);
    out.push("qcod", qcod(p25, p75));
    out.push("energy", energy);
    out.push("rms", (energy / n).sqrt());
    if m.degenerate {
        out.flag("zero_variance");
    }
    out
}

/// Histogram features on discretised levels.
pub fn histogram_features(levels: &[u16]) -> FeatureSet {
    let x: Vec<f64> = levels.iter().map(|&l| f64::from(l)).collect();
    let mut out = FeatureSet::default();
    let m = moments(&x);
    let s = sorted(&x);
    let n = x.len() as f64;
    let p25 = nearest_rank_percentile(&s, 25.0);
    let p75 = nearest_rank_percentile(&s, 75.0);
    let max_level = levels.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0usize; max_level + 1];
    for &l in levels {
        counts[l as usize] += 1;
    }
    // first most frequent level
    let mode = counts
        .iter()
        .enumerate()
        .fold((0, 0), |best, (l, &c)| if c > best.1 { (l, c) } else { best })
        .0;
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = c as f64 / n;
        entropy -= p * p.log2();
        uniformity += p * p;
    }
    out.push("mean", m.mean);
    out.push("var", m.var);
    out.push("skewness", m.skewness);
    out.push("kurtosis", m.kurtosis);
    out.push("median", nearest_rank_percentile(&s, 50.0));
    out.push("min", s[0]);
    out.push("p10", nearest_rank_percentile(&s, 10.0));
    out.push("p90", nearest_rank_percentile(&s, 90.0));
    out.push("max", s[s.len() - 1]);
    out.push("mode", mode as f64);
    out.push("iqr", p75 - p25);
    out.push("range", s[s.len() - 1] - s[0]);
    out.push("qcod", qcod(p25, p75));
    out.push("entropy", entropy);
    out.push("uniformity", uniformity);
    if m.degenerate {
        out.flag("zero_variance");
    }
    out
}

/// Statistics on raw values and histogram features on their levels.
pub fn intensity_features(values: &[f64], levels: &[u16]) -> (FeatureSet, FeatureSet) {
    (statistics_features(values), histogram_features(levels))
}

fn roi_indices(image: &VoxelGrid, inside: &[bool]) -> Result<Vec<usize>> {
    if inside.len() != image.values().len() {
        return Err(Error::Geometry("roi does not match image grid".into()));
    }
    let idx: Vec<usize> = (0..inside.len()).filter(|&i| inside[i]).collect();
    if idx.is_empty() {
        return Err(Error::EmptyRoi("local intensity peak needs a voxel".into()));
    }
    Ok(idx)
}

/// Mean over the 1 cm³ sphere centred on the brightest ROI voxel (first in
/// scan order on ties); sphere samples beyond the grid are dropped.
pub fn local_intensity_peak(image: &VoxelGrid, inside: &[bool]) -> Result<f64> {
    Ok(local_intensity_peaks(image, inside)?.0)
}

/// `(local, global)` peaks. The global peak is the largest sphere mean over
/// all ROI voxel centres.
pub fn local_intensity_peaks(image: &VoxelGrid, inside: &[bool]) -> Result<(f64, f64)> {
    let idx = roi_indices(image, inside)?;
    let g = image.geometry();
    let dims = g.dims();
    let offsets = sphere_offsets(g, PEAK_SPHERE_RADIUS_MM);
    let values = image.values();
    let mut hottest = idx[0];
    for &i in &idx {
        if values[i] > values[hottest] {
            hottest = i;
        }
    }
    let local = sphere_mean(values, dims, g.voxel_coords(hottest), &offsets);
    let global = idx
        .iter()
        .map(|&i| sphere_mean(values, dims, g.voxel_coords(i), &offsets))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((local, global))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::GridGeometry;

    #[test]
    fn symmetric_values_have_zero_skew() {
        let f = statistics_features(&[1.0, 2.0, 2.0, 3.0]);
        assert!(f.get("skewness").unwrap().abs() < 1e-15);
        assert!((f.get("var").unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn histogram_qcod_nearest_rank() {
        let f = histogram_features(&[1, 1, 3, 3]);
        assert_eq!(f.get("qcod"), Some(0.5));
        assert_eq!(f.get("mode"), Some(1.0));
        assert!((f.get("entropy").unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_values_flag_zero_variance() {
        let f = statistics_features(&[4.0; 10]);
        assert_eq!(f.get("skewness"), Some(0.0));
        assert!(f.flags.iter().any(|s| s == "zero_variance"));
    }

    #[test]
    fn percentile_ranks() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank_percentile(&s, 25.0), 3.0);
        assert_eq!(nearest_rank_percentile(&s, 50.0), 5.0);
        assert_eq!(nearest_rank_percentile(&s, 0.0), 1.0);
        assert_eq!(nearest_rank_percentile(&s, 100.0), 10.0);
    }

    #[test]
    fn constant_image_peak_is_constant() {
        let g = GridGeometry::axis_aligned([9, 9, 9], [2.0; 3], [0.0; 3]).unwrap();
        let img = VoxelGrid::filled(g, 3.5);
        let mut inside = vec![false; 729];
        inside[364] = true;
        inside[0] = true;
        let (l, gl) = local_intensity_peaks(&img, &inside).unwrap();
        assert!((l - 3.5).abs() < 1e-12);
        assert!((gl - 3.5).abs() < 1e-12);
    }
}
