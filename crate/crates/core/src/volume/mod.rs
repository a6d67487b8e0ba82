//! Voxel grids, label masks and their physical-space geometry.
//!
//! World coordinates follow the NIfTI convention (RAS+, millimetres): +x is
//! patient left-to-right, +y posterior-to-anterior, +z inferior-to-superior.
//! Every world-space computation goes through [`GridGeometry`]; raw voxel
//! indices are never compared across grids.

mod nifti;
mod resample;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub use nifti::{load_mask, load_volume, save_mask, save_volume, save_volume_as, StorageType};
pub use resample::{crop_to_box, resample, Interpolation, Resample};

/// Edge length of the oropharyngeal crop box, in millimetres.
pub const HN_BOX_SIZE_MM: f64 = 224.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    direction: Matrix3<f64>,
    world_from_index: Matrix3<f64>,
    index_from_world: Matrix3<f64>,
}

impl GridGeometry {
    /// Builds a geometry, validating spacing and the direction matrix.
    ///
    /// `direction` columns are the world directions of the voxel axes; they
    /// are normalised here, so a raw affine block may be passed.
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], direction: Matrix3<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Geometry(format!("spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Geometry("origin is not finite".into()));
        }
        let mut direction = direction;
        for mut col in direction.column_iter_mut() {
            let norm = col.norm();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Geometry("direction has a zero column".into()));
            }
            col /= norm;
        }
        let world_from_index = direction * Matrix3::from_diagonal(&Vector3::from(spacing));
        let index_from_world = world_from_index
            .try_inverse()
            .filter(|_| direction.determinant().abs() > 1e-9)
            .ok_or_else(|| Error::Geometry("direction matrix is singular".into()))?;
        Ok(Self {
            dims,
            spacing,
            origin,
            direction,
            world_from_index,
            index_from_world,
        })
    }

    /// Axis-aligned (identity direction) geometry.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, origin, Matrix3::identity())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn direction(&self) -> &Matrix3<f64> {
        &self.direction
    }

    pub fn n_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.iter().product::<f64>() * self.direction.determinant().abs()
    }

    /// Physical extent covered by the voxels along each axis.
    pub fn extent_mm(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    #[inline]
    pub fn linear_index(&self, [x, y, z]: [usize; 3]) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn voxel_coords(&self, linear: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    /// World position (mm) of a possibly fractional voxel index.
    pub fn world(&self, index: [f64; 3]) -> [f64; 3] {
        let w = self.world_from_index * Vector3::from(index) + Vector3::from(self.origin);
        [w.x, w.y, w.z]
    }

    pub fn voxel_world(&self, [x, y, z]: [usize; 3]) -> [f64; 3] {
        self.world([x as f64, y as f64, z as f64])
    }

    /// Continuous voxel index of a world position; inverse of [`world`](Self::world).
    pub fn continuous_index(&self, world: [f64; 3]) -> [f64; 3] {
        let v = self.index_from_world * (Vector3::from(world) - Vector3::from(self.origin));
        [v.x, v.y, v.z]
    }

    pub(crate) fn world_from_index(&self) -> &Matrix3<f64> {
        &self.world_from_index
    }

    pub(crate) fn index_from_world(&self) -> &Matrix3<f64> {
        &self.index_from_world
    }

    /// 4×4 voxel-to-world affine, row-major, as stored in a NIfTI sform.
    pub fn affine(&self) -> [[f64; 4]; 4] {
        let m = &self.world_from_index;
        let mut out = [[0.0; 4]; 4];
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = m[(r, c)];
            }
            out[r][3] = self.origin[r];
        }
        out[3][3] = 1.0;
        out
    }

    /// Voxel axis that points most strongly along world +z, and whether
    /// increasing index moves superior.
    pub fn superior_axis(&self) -> (usize, bool) {
        let row = self.direction.row(2);
        let (axis, value) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, v)| (i, *v))
            .unwrap_or((2, 1.0));
        (axis, value >= 0.0)
    }

    /// Same dims and world mapping to within `tol_mm`.
    pub fn approx_eq(&self, other: &GridGeometry, tol_mm: f64) -> bool {
        if self.dims != other.dims {
            return false;
        }
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol_mm);
        close(&self.spacing, &other.spacing)
            && close(&self.origin, &other.origin)
            && (self.direction - other.direction).abs().max() <= 1e-6
    }

    pub(crate) fn require_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.approx_eq(other, 1e-4) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "{what}: grids differ (dims {:?} vs {:?})",
                self.dims, other.dims
            )))
        }
    }

    /// In-bounds 26-neighbourhood (or 6 when `full` is false) of a voxel.
    pub(crate) fn neighbours(&self, [x, y, z]: [usize; 3], full: bool) -> impl Iterator<Item = usize> + '_ {
        let offsets: &'static [[i64; 3]] = if full { &OFFSETS_26 } else { &OFFSETS_6 };
        let dims = self.dims;
        offsets.iter().filter_map(move |o| {
            let nx = x as i64 + o[0];
            let ny = y as i64 + o[1];
            let nz = z as i64 + o[2];
            if nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] as i64 || ny >= dims[1] as i64 || nz >= dims[2] as i64 {
                None
            } else {
                Some(nx as usize + dims[0] * (ny as usize + dims[1] * nz as usize))
            }
        })
    }
}

pub(crate) const OFFSETS_6: [[i64; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

pub(crate) const OFFSETS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// Scalar field: PET in SUV or CT in HU.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    geometry: GridGeometry,
    values: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(geometry: GridGeometry, values: Vec<f32>) -> Result<Self> {
        if values.len() != geometry.n_voxels() {
            return Err(Error::Geometry(format!(
                "{} values for {} voxels",
                values.len(),
                geometry.n_voxels()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at voxel {i}")));
        }
        Ok(Self { geometry, values })
    }

    pub fn filled(geometry: GridGeometry, value: f32) -> Self {
        let n = geometry.n_voxels();
        Self {
            geometry,
            values: vec![value; n],
        }
    }

    pub fn from_fn(geometry: GridGeometry, mut f: impl FnMut([usize; 3]) -> f32) -> Self {
        let values = (0..geometry.n_voxels()).map(|i| f(geometry.voxel_coords(i))).collect();
        Self { geometry, values }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn get(&self, ijk: [usize; 3]) -> f32 {
        self.values[self.geometry.linear_index(ijk)]
    }

    pub fn set(&mut self, ijk: [usize; 3], value: f32) {
        let i = self.geometry.linear_index(ijk);
        self.values[i] = value;
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Label values carried by segmentation masks.
pub mod labels {
    pub const BACKGROUND: u8 = 0;
    pub const GTVP: u8 = 1;
    pub const GTVN: u8 = 2;
}

/// Integer segmentation: 0 background, 1 GTVp, 2 GTVn.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    geometry: GridGeometry,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(geometry: GridGeometry, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != geometry.n_voxels() {
            return Err(Error::Geometry(format!(
                "{} labels for {} voxels",
                labels.len(),
                geometry.n_voxels()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > labels::GTVN) {
            return Err(Error::Label(bad as i64));
        }
        Ok(Self { geometry, labels })
    }

    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.n_voxels();
        Self {
            geometry,
            labels: vec![0; n],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, ijk: [usize; 3]) -> u8 {
        self.labels[self.geometry.linear_index(ijk)]
    }

    /// Panics if `label` is not 0, 1 or 2.
    pub fn set(&mut self, ijk: [usize; 3], label: u8) {
        assert!(label <= labels::GTVN, "label {label} out of range");
        let i = self.geometry.linear_index(ijk);
        self.labels[i] = label;
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != labels::BACKGROUND).count()
    }
}

/// Axis-aligned world-space box.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundingBoxMM {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

impl BoundingBoxMM {
    pub fn new(center: [f64; 3], size: [f64; 3]) -> Result<Self> {
        if size.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Geometry(format!("box size must be positive, got {size:?}")));
        }
        Ok(Self { center, size })
    }

    /// The fixed 224 mm cube used for the oropharyngeal region.
    pub fn head_neck(center: [f64; 3]) -> Self {
        Self {
            center,
            size: [HN_BOX_SIZE_MM; 3],
        }
    }

    pub fn min_corner(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.center[a] - self.size[a] / 2.0)
    }

    pub fn max_corner(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.center[a] + self.size[a] / 2.0)
    }

    /// Closed containment test with a small tolerance for float noise.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        const EPS: f64 = 1e-9;
        (0..3).all(|a| (p[a] - self.center[a]).abs() <= self.size[a] / 2.0 + EPS)
    }

    /// Axis-aligned grid tiling the box with voxels of `spacing`.
    pub fn grid_geometry(&self, spacing: [f64; 3]) -> Result<GridGeometry> {
        let mut dims = [0usize; 3];
        for a in 0..3 {
            if !(spacing[a] > 0.0) {
                return Err(Error::Geometry(format!("spacing must be positive, got {spacing:?}")));
            }
            let n = self.size[a] / spacing[a];
            if (n - n.round()).abs() > 1e-6 || n.round() < 1.0 {
                return Err(Error::Geometry(format!(
                    "box size {} mm is not a multiple of spacing {} mm",
                    self.size[a], spacing[a]
                )));
            }
            dims[a] = n.round() as usize;
        }
        let origin = std::array::from_fn(|a| self.center[a] - self.size[a] / 2.0 + spacing[a] / 2.0);
        GridGeometry::axis_aligned(dims, spacing, origin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oblique() -> GridGeometry {
        let angle: f64 = 0.3;
        let rot = Matrix3::new(
            angle.cos(),
            -angle.sin(),
            0.0,
            angle.sin(),
            angle.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        );
        GridGeometry::new([4, 5, 6], [0.8, 1.2, 2.5], [-10.0, 3.0, 40.0], rot).unwrap()
    }

    #[test]
    fn world_and_index_are_inverse() {
        let g = oblique();
        let idx = [1.25, 3.5, 4.0];
        let back = g.continuous_index(g.world(idx));
        for a in 0..3 {
            assert!((back[a] - idx[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_spacing_and_singular_direction() {
        assert!(GridGeometry::axis_aligned([2, 2, 2], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        let singular = Matrix3::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(GridGeometry::new([2, 2, 2], [1.0; 3], [0.0; 3], singular).is_err());
    }

    #[test]
    fn linear_index_round_trip() {
        let g = oblique();
        for i in 0..g.n_voxels() {
            assert_eq!(g.linear_index(g.voxel_coords(i)), i);
        }
    }

    #[test]
    fn mask_rejects_label_three() {
        let g = GridGeometry::axis_aligned([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        assert!(matches!(LabelMask::new(g, vec![0, 3]), Err(Error::Label(3))));
    }

    #[test]
    fn voxel_grid_rejects_nan() {
        let g = GridGeometry::axis_aligned([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        assert!(VoxelGrid::new(g, vec![0.0, f32::NAN]).is_err());
    }

    #[test]
    fn head_neck_box_tiles_224_cube() {
        let b = BoundingBoxMM::head_neck([1.0, 2.0, 3.0]);
        let g = b.grid_geometry([1.0; 3]).unwrap();
        assert_eq!(g.dims(), [224, 224, 224]);
        let first = g.voxel_world([0, 0, 0]);
        assert!((first[0] - (1.0 - 112.0 + 0.5)).abs() < 1e-12);
        assert!(b.grid_geometry([3.0; 3]).is_err());
    }

    #[test]
    fn superior_axis_follows_direction() {
        let g = GridGeometry::axis_aligned([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(g.superior_axis(), (2, true));
        let flipped = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0);
        let g = GridGeometry::new([2, 2, 2], [1.0; 3], [0.0; 3], flipped).unwrap();
        assert_eq!(g.superior_axis(), (1, false));
    }

    #[test]
    fn offsets_26_are_unique_and_exclude_center() {
        let mut v = OFFSETS_26.to_vec();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 26);
        assert!(!v.contains(&[0, 0, 0]));
    }
}
