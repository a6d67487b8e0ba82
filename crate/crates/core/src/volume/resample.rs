use nalgebra::Vector3;
use rayon::prelude::*;

use super::{BoundingBoxMM, GridGeometry, LabelMask, VoxelGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Nearest,
}

/// Grids that can be sampled onto another geometry.
///
/// Sampling is voxel-centre aligned in world space. A sample is inside the
/// support when its continuous index lies within half a voxel of the source
/// grid on every axis; outside samples take 0 (scalar) or background (mask).
pub trait Resample: Sized {
    fn geometry(&self) -> &GridGeometry;

    fn resample_onto(&self, target: &GridGeometry, method: Interpolation) -> Result<Self>;
}

/// Affine map from target voxel index to source continuous index.
struct IndexMap {
    linear: nalgebra::Matrix3<f64>,
    offset: Vector3<f64>,
}

impl IndexMap {
    fn new(source: &GridGeometry, target: &GridGeometry) -> Self {
        let linear = source.index_from_world() * target.world_from_index();
        let offset = source.index_from_world() * (Vector3::from(target.origin()) - Vector3::from(source.origin()));
        Self { linear, offset }
    }

    #[inline]
    fn map(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        let v = self.linear * Vector3::new(x as f64, y as f64, z as f64) + self.offset;
        [v.x, v.y, v.z]
    }
}

const SUPPORT_EPS: f64 = 1e-6;

#[inline]
fn in_support(ci: [f64; 3], dims: [usize; 3]) -> bool {
    (0..3).all(|a| ci[a] >= -0.5 - SUPPORT_EPS && ci[a] <= dims[a] as f64 - 0.5 + SUPPORT_EPS)
}

/// Lower corner index and fractional weight along one axis, with edge clamp.
#[inline]
fn axis_weights(c: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let c = c.clamp(0.0, (n - 1) as f64);
    let i0 = (c.floor() as usize).min(n - 2);
    (i0, i0 + 1, c - i0 as f64)
}

fn sample_linear(values: &[f32], dims: [usize; 3], ci: [f64; 3]) -> f32 {
    if !in_support(ci, dims) {
        return 0.0;
    }
    let (x0, x1, fx) = axis_weights(ci[0], dims[0]);
    let (y0, y1, fy) = axis_weights(ci[1], dims[1]);
    let (z0, z1, fz) = axis_weights(ci[2], dims[2]);
    let at = |x: usize, y: usize, z: usize| values[x + dims[0] * (y + dims[1] * z)] as f64;
    let c00 = at(x0, y0, z0) * (1.0 - fx) + at(x1, y0, z0) * fx;
    let c10 = at(x0, y1, z0) * (1.0 - fx) + at(x1, y1, z0) * fx;
    let c01 = at(x0, y0, z1) * (1.0 - fx) + at(x1, y0, z1) * fx;
    let c11 = at(x0, y1, z1) * (1.0 - fx) + at(x1, y1, z1) * fx;
    let c0 = c00 * (1.0 - fy) + c10 * fy;
    let c1 = c01 * (1.0 - fy) + c11 * fy;
    (c0 * (1.0 - fz) + c1 * fz) as f32
}

#[inline]
fn nearest_index(ci: [f64; 3], dims: [usize; 3]) -> Option<usize> {
    if !in_support(ci, dims) {
        return None;
    }
    let r = |c: f64, n: usize| (c.round().max(0.0) as usize).min(n - 1);
    Some(r(ci[0], dims[0]) + dims[0] * (r(ci[1], dims[1]) + dims[1] * r(ci[2], dims[2])))
}

fn sample_all<T: Copy + Send + Default>(
    source: &GridGeometry,
    target: &GridGeometry,
    f: impl Fn([f64; 3]) -> T + Sync,
) -> Vec<T> {
    let map = IndexMap::new(source, target);
    let [nx, ny, nz] = target.dims();
    let mut out = vec![T::default(); target.n_voxels()];
    out.par_chunks_mut(nx * ny).enumerate().take(nz).for_each(|(z, slab)| {
        for y in 0..ny {
            for x in 0..nx {
                slab[x + nx * y] = f(map.map(x, y, z));
            }
        }
    });
    out
}

impl VoxelGrid {
    /// Interpolated value at a world position (0 outside the support).
    pub fn sample_world(&self, world: [f64; 3], method: Interpolation) -> f32 {
        let ci = self.geometry().continuous_index(world);
        let dims = self.geometry().dims();
        match method {
            Interpolation::Linear => sample_linear(self.values(), dims, ci),
            Interpolation::Nearest => nearest_index(ci, dims).map_or(0.0, |i| self.values()[i]),
        }
    }
}

impl Resample for VoxelGrid {
    fn geometry(&self) -> &GridGeometry {
        VoxelGrid::geometry(self)
    }

    fn resample_onto(&self, target: &GridGeometry, method: Interpolation) -> Result<Self> {
        let src = self.geometry();
        let dims = src.dims();
        let values = self.values();
        let out = match method {
            Interpolation::Linear => sample_all(src, target, |ci| sample_linear(values, dims, ci)),
            Interpolation::Nearest => sample_all(src, target, |ci| nearest_index(ci, dims).map_or(0.0, |i| values[i])),
        };
        VoxelGrid::new(target.clone(), out)
    }
}

impl Resample for LabelMask {
    fn geometry(&self) -> &GridGeometry {
        LabelMask::geometry(self)
    }

    fn resample_onto(&self, target: &GridGeometry, method: Interpolation) -> Result<Self> {
        if method != Interpolation::Nearest {
            return Err(Error::Method(
                "label masks must be resampled with nearest-neighbour interpolation".into(),
            ));
        }
        let src = self.geometry();
        let dims = src.dims();
        let labels = self.labels();
        let out = sample_all(src, target, |ci| nearest_index(ci, dims).map_or(0, |i| labels[i]));
        LabelMask::new(target.clone(), out)
    }
}

/// Grid with the requested spacing covering the source extent, centred on it.
///
/// Output dims are `ceil(extent / spacing)`; any overhang is split evenly on
/// both sides so every output voxel centre stays inside the source extent.
pub fn resampled_geometry(source: &GridGeometry, target_spacing: [f64; 3]) -> Result<GridGeometry> {
    if target_spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::Geometry(format!(
            "target spacing must be positive, got {target_spacing:?}"
        )));
    }
    let extent = source.extent_mm();
    let spacing = source.spacing();
    let mut dims = [0usize; 3];
    let mut first_center = [0.0; 3];
    for a in 0..3 {
        let ratio = extent[a] / target_spacing[a];
        dims[a] = ((ratio - 1e-9).ceil() as usize).max(1);
        let overhang = dims[a] as f64 * target_spacing[a] - extent[a];
        // continuous source index of the first output voxel centre
        first_center[a] = -0.5 + (target_spacing[a] / 2.0 - overhang / 2.0) / spacing[a];
    }
    let origin = source.world(first_center);
    GridGeometry::new(dims, target_spacing, origin, *source.direction())
}

/// Resamples onto a grid of `target_spacing` covering the same extent.
pub fn resample<T: Resample>(grid: &T, target_spacing: [f64; 3], method: Interpolation) -> Result<T> {
    let target = resampled_geometry(grid.geometry(), target_spacing)?;
    grid.resample_onto(&target, method)
}

/// Samples `grid` over an axis-aligned world box at `out_spacing`.
///
/// Regions of the box outside the input are filled with 0 / background.
pub fn crop_to_box<T: Resample>(
    grid: &T,
    bbox: &BoundingBoxMM,
    out_spacing: [f64; 3],
    method: Interpolation,
) -> Result<T> {
    let target = bbox.grid_geometry(out_spacing)?;
    grid.resample_onto(&target, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(dims: [usize; 3], spacing: [f64; 3]) -> GridGeometry {
        GridGeometry::axis_aligned(dims, spacing, [5.0, -3.0, 12.0]).unwrap()
    }

    #[test]
    fn constant_grid_stays_constant_for_any_spacing() {
        let g = VoxelGrid::filled(geom([7, 5, 3], [1.0, 1.5, 2.0]), 4.25);
        for spacing in [[1.0; 3], [0.7, 0.9, 3.0], [3.0, 3.0, 3.0], [2.2, 0.4, 1.1]] {
            let r = resample(&g, spacing, Interpolation::Linear).unwrap();
            assert_eq!(r.geometry().spacing(), spacing);
            assert!(r.values().iter().all(|&v| (v - 4.25).abs() < 1e-6), "{spacing:?}");
        }
    }

    #[test]
    fn output_dims_are_ceil_of_extent() {
        let g = VoxelGrid::filled(geom([7, 5, 3], [1.0, 1.5, 2.0]), 1.0);
        let r = resample(&g, [3.0, 2.0, 4.0], Interpolation::Linear).unwrap();
        // extents 7, 7.5, 6
        assert_eq!(r.geometry().dims(), [3, 4, 2]);
    }

    #[test]
    fn ramp_midpoint_interpolates_linearly() {
        let g = VoxelGrid::new(geom([2, 1, 1], [2.0, 2.0, 2.0]), vec![0.0, 10.0]).unwrap();
        let a = g.geometry().voxel_world([0, 0, 0]);
        let b = g.geometry().voxel_world([1, 0, 0]);
        let mid = [(a[0] + b[0]) / 2.0, a[1], a[2]];
        assert!((g.sample_world(mid, Interpolation::Linear) - 5.0).abs() < 1e-6);

        let r = resample(&g, [1.0, 2.0, 2.0], Interpolation::Linear).unwrap();
        assert_eq!(r.geometry().dims(), [4, 1, 1]);
        // centres at source indices -0.25, 0.25, 0.75, 1.25 (edge-clamped)
        let expected = [0.0, 2.5, 7.5, 10.0];
        for (v, e) in r.values().iter().zip(expected) {
            assert!((v - e).abs() < 1e-5, "{v} vs {e}");
        }
    }

    #[test]
    fn same_spacing_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geometry = geom([6, 4, 5], [1.2, 0.8, 2.0]);
        let g = VoxelGrid::from_fn(geometry, |_| rng.random_range(-5.0..5.0));
        let r = resample(&g, [1.2, 0.8, 2.0], Interpolation::Linear).unwrap();
        assert!(r.geometry().approx_eq(g.geometry(), 1e-9));
        for (a, b) in r.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn mask_rejects_linear() {
        let m = LabelMask::empty(geom([2, 2, 2], [1.0; 3]));
        assert!(matches!(
            resample(&m, [0.5; 3], Interpolation::Linear),
            Err(Error::Method(_))
        ));
    }

    #[test]
    fn nearest_mask_never_invents_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let geometry = geom([9, 8, 7], [1.0, 1.0, 1.0]);
        // only labels 0 and 2 present
        let labels = (0..geometry.n_voxels())
            .map(|_| if rng.random_bool(0.3) { 2 } else { 0 })
            .collect();
        let m = LabelMask::new(geometry, labels).unwrap();
        for spacing in [[0.6; 3], [2.0; 3], [1.3, 0.7, 2.9]] {
            let r = resample(&m, spacing, Interpolation::Nearest).unwrap();
            assert!(r.labels().iter().all(|&l| l == 0 || l == 2));
        }
    }

    #[test]
    fn crop_fills_outside_with_zero() {
        let geometry = GridGeometry::axis_aligned([20, 20, 20], [1.0; 3], [0.0; 3]).unwrap();
        let g = VoxelGrid::filled(geometry, 3.0);
        // voxel centres span [0, 19]; extent [-0.5, 19.5]
        let bbox = BoundingBoxMM::new([19.5, 10.0, 10.0], [10.0, 10.0, 10.0]).unwrap();
        let c = crop_to_box(&g, &bbox, [1.0; 3], Interpolation::Linear).unwrap();
        assert_eq!(c.geometry().dims(), [10, 10, 10]);
        for z in 0..10 {
            for y in 0..10 {
                for x in 0..10 {
                    let expected = if x < 5 { 3.0 } else { 0.0 };
                    assert_eq!(c.get([x, y, z]), expected);
                }
            }
        }
    }

    #[test]
    fn crop_extent_matches_box() {
        let geometry = GridGeometry::axis_aligned([30, 30, 30], [2.0; 3], [-30.0; 3]).unwrap();
        let g = VoxelGrid::filled(geometry, 1.0);
        let bbox = BoundingBoxMM::new([0.0; 3], [24.0, 30.0, 12.0]).unwrap();
        let c = crop_to_box(&g, &bbox, [1.5; 3], Interpolation::Linear).unwrap();
        let ext = c.geometry().extent_mm();
        for a in 0..3 {
            assert!((ext[a] - bbox.size[a]).abs() <= 1.5);
        }
    }
}
