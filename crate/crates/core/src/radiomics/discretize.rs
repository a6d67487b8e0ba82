use serde::{Deserialize, Serialize};

use super::PreparedRoi;
use crate::error::{Error, Result};

/// Fixed-bin-number discretisation of ROI intensities.
///
/// `level = min(n_bins, floor(n_bins · (x − min) / (max − min)) + 1)`; a
/// constant ROI maps entirely to level 1.
pub fn discretize_fbn(values: &[f64], n_bins: u16) -> Result<Vec<u16>> {
    if n_bins < 2 {
        return Err(Error::Invalid(format!("n_bins must be at least 2, got {n_bins}")));
    }
    if values.is_empty() {
        return Err(Error::EmptyRoi("nothing to discretise".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return Ok(vec![1; values.len()]);
    }
    let nb = f64::from(n_bins);
    Ok(values
        .iter()
        .map(|&x| {
            let level = (nb * (x - lo) / (hi - lo)).floor() + 1.0;
            level.min(nb) as u16
        })
        .collect())
}

/// Grey levels on a compact grid; level 0 marks voxels outside the ROI.
///
/// Voxels beyond the grid edge are treated as outside the ROI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedRoi {
    dims: [usize; 3],
    spacing: [f64; 3],
    levels: Vec<u16>,
    n_bins: u16,
}

impl DiscretizedRoi {
    pub fn from_levels(dims: [usize; 3], levels: Vec<u16>, n_bins: u16) -> Result<Self> {
        if levels.len() != dims.iter().product::<usize>() {
            return Err(Error::Geometry("level count does not match dims".into()));
        }
        if let Some(&bad) = levels.iter().find(|&&l| l > n_bins) {
            return Err(Error::Invalid(format!("level {bad} exceeds {n_bins} bins")));
        }
        if levels.iter().all(|&l| l == 0) {
            return Err(Error::EmptyRoi("no roi voxels".into()));
        }
        Ok(Self {
            dims,
            spacing: [1.0; 3],
            levels,
            n_bins,
        })
    }

    /// Crops to the ROI bounding box and discretises the ROI intensities.
    pub fn from_prepared(prepared: &PreparedRoi, n_bins: u16) -> Result<Self> {
        let geometry = prepared.geometry();
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for (i, _) in prepared.inside.iter().enumerate().filter(|(_, &m)| m) {
            let c = geometry.voxel_coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        if lo[0] == usize::MAX {
            return Err(Error::EmptyRoi("no roi voxels".into()));
        }
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let levels = discretize_fbn(&prepared.roi_values(), n_bins)?;
        let mut grid = vec![0u16; dims.iter().product()];
        // roi_values() is in scan order, as is this walk
        let mut next = levels.into_iter();
        for (i, _) in prepared.inside.iter().enumerate().filter(|(_, &m)| m) {
            let c = geometry.voxel_coords(i);
            let local = (c[0] - lo[0]) + dims[0] * ((c[1] - lo[1]) + dims[1] * (c[2] - lo[2]));
            grid[local] = next.next().expect("one level per roi voxel");
        }
        Ok(Self {
            dims,
            spacing: geometry.spacing(),
            levels: grid,
            n_bins,
        })
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn n_bins(&self) -> u16 {
        self.n_bins
    }

    /// Per-voxel levels over the compact grid (0 = outside).
    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    /// Levels of ROI voxels in scan order.
    pub fn roi_levels(&self) -> Vec<u16> {
        self.levels.iter().copied().filter(|&l| l > 0).collect()
    }

    pub fn voxel_count(&self) -> usize {
        self.levels.iter().filter(|&&l| l > 0).count()
    }

    #[inline]
    pub(crate) fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub(crate) fn coords(&self, i: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    /// Level at an offset from voxel `i`, 0 when outside the grid.
    #[inline]
    pub(crate) fn level_at_offset(&self, i: usize, o: [i64; 3]) -> u16 {
        match self.offset_index(i, o) {
            Some(j) => self.levels[j],
            None => 0,
        }
    }

    #[inline]
    pub(crate) fn offset_index(&self, i: usize, o: [i64; 3]) -> Option<usize> {
        let [x, y, z] = self.coords(i);
        let (qx, qy, qz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
        if qx < 0
            || qy < 0
            || qz < 0
            || qx >= self.dims[0] as i64
            || qy >= self.dims[1] as i64
            || qz >= self.dims[2] as i64
        {
            None
        } else {
            Some(self.index(qx as usize, qy as usize, qz as usize))
        }
    }

    /// Mirror the grey scale: level i becomes n_bins + 1 − i.
    pub fn inverted(&self) -> Self {
        let mut out = self.clone();
        for l in &mut out.levels {
            if *l > 0 {
                *l = self.n_bins + 1 - *l;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_map_to_first_and_last_bin() {
        assert_eq!(discretize_fbn(&[0.0, 1.0], 64).unwrap(), vec![1, 64]);
    }

    #[test]
    fn constant_roi_is_level_one() {
        assert_eq!(discretize_fbn(&[3.3; 5], 64).unwrap(), vec![1; 5]);
    }

    #[test]
    fn ramp_maps_one_value_per_bin() {
        let values: Vec<f64> = (0..64).map(f64::from).collect();
        let levels = discretize_fbn(&values, 64).unwrap();
        // floor(64·i/63) + 1 = i + 1 for every i in 0..63 (63 caps at 64)
        for (i, l) in levels.iter().enumerate() {
            assert_eq!(*l as usize, i + 1);
        }
    }

    #[test]
    fn rejects_single_bin() {
        assert!(discretize_fbn(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn levels_stay_in_range() {
        let values = [-4.0, 17.5, 3.25, 9.0, -4.0, 0.1];
        let levels = discretize_fbn(&values, 8).unwrap();
        assert!(levels.iter().all(|&l| (1..=8).contains(&l)));
        assert_eq!(*levels.iter().max().unwrap(), 8);
    }
}
