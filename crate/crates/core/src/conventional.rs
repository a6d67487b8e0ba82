//! The ten conventional PET/CT features computed from a predicted mask.
//!
//! SUV statistics, MTV and TLG use the union of GTVp and GTVn; tumour volume
//! and diameter use GTVp only; node count uses GTVn components.

use serde::{Deserialize, Serialize};

use crate::components::{components, Connectivity};
use crate::error::{Error, Result};
use crate::volume::{labels, GridGeometry, LabelMask, VoxelGrid};

/// Radius (mm) of a sphere of volume 1 cm³.
pub const PEAK_SPHERE_RADIUS_MM: f64 = 6.203_504_908_994;

/// Set of voxels on a particular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    geometry: GridGeometry,
    indices: Vec<usize>,
}

impl Roi {
    /// `indices` are sorted and deduplicated.
    pub fn new(geometry: GridGeometry, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i >= geometry.n_voxels()) {
            return Err(Error::Geometry("roi index outside the grid".into()));
        }
        Ok(Self { geometry, indices })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn volume_ml(&self) -> f64 {
        self.indices.len() as f64 * self.geometry.voxel_volume_mm3() / 1000.0
    }

    fn subset(&self, indices: Vec<usize>) -> Roi {
        Roi {
            geometry: self.geometry.clone(),
            indices,
        }
    }
}

/// Voxels labelled GTVp or GTVn.
pub fn roi_union(mask: &LabelMask) -> Result<Roi> {
    roi_of(mask, |l| l == labels::GTVP || l == labels::GTVN)
}

pub fn roi_of(mask: &LabelMask, keep: impl Fn(u8) -> bool) -> Result<Roi> {
    let indices: Vec<usize> = mask
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| keep(l))
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(Error::EmptyRoi("no foreground voxels in mask".into()));
    }
    Roi::new(mask.geometry().clone(), indices)
}

fn check_roi(pet: &VoxelGrid, roi: &Roi) -> Result<()> {
    pet.geometry().require_same(roi.geometry(), "pet vs roi")?;
    if roi.is_empty() {
        return Err(Error::EmptyRoi("roi has no voxels".into()));
    }
    Ok(())
}

/// (SUVmax, SUVmean) over the roi.
pub fn suv_statistics(pet: &VoxelGrid, roi: &Roi) -> Result<(f64, f64)> {
    check_roi(pet, roi)?;
    let values = pet.values();
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &i in roi.indices() {
        let v = f64::from(values[i]);
        max = max.max(v);
        sum += v;
    }
    Ok((max, sum / roi.len() as f64))
}

/// Voxel offsets whose centres lie within `radius_mm` of the origin voxel centre.
pub(crate) fn sphere_offsets(geometry: &GridGeometry, radius_mm: f64) -> Vec<[i64; 3]> {
    let m = geometry.world_from_index();
    // bound each axis by the radius over the smallest spacing
    let reach: [i64; 3] = std::array::from_fn(|a| (radius_mm / geometry.spacing()[a]).ceil() as i64 + 1);
    let mut out = Vec::new();
    for dz in -reach[2]..=reach[2] {
        for dy in -reach[1]..=reach[1] {
            for dx in -reach[0]..=reach[0] {
                let d = m * nalgebra::Vector3::new(dx as f64, dy as f64, dz as f64);
                if d.norm() <= radius_mm + 1e-9 {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Mean over the in-volume voxels of a sphere centred on `center`.
pub(crate) fn sphere_mean(values: &[f32], dims: [usize; 3], center: [usize; 3], offsets: &[[i64; 3]]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in offsets {
        let x = center[0] as i64 + o[0];
        let y = center[1] as i64 + o[1];
        let z = center[2] as i64 + o[2];
        if x < 0 || y < 0 || z < 0 || x >= dims[0] as i64 || y >= dims[1] as i64 || z >= dims[2] as i64 {
            continue;
        }
        sum += f64::from(values[x as usize + dims[0] * (y as usize + dims[1] * z as usize)]);
        n += 1;
    }
    sum / n as f64
}

/// SUVpeak: the highest 1 cm³ sphere mean centred on any roi voxel.
pub fn suv_peak(pet: &VoxelGrid, roi: &Roi) -> Result<f64> {
    check_roi(pet, roi)?;
    let geometry = pet.geometry();
    let offsets = sphere_offsets(geometry, PEAK_SPHERE_RADIUS_MM);
    let dims = geometry.dims();
    Ok(roi
        .indices()
        .iter()
        .map(|&i| sphere_mean(pet.values(), dims, geometry.voxel_coords(i), &offsets))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum MtvRule {
    /// SUV ≥ the given value.
    Absolute(f64),
    /// SUV ≥ fraction × SUVmax of the roi.
    Relative(f64),
}

/// Metabolic tumour volume: (volume in ml, thresholded sub-roi).
pub fn mtv(pet: &VoxelGrid, roi: &Roi, rule: MtvRule) -> Result<(f64, Roi)> {
    let threshold = match rule {
        MtvRule::Absolute(t) => t,
        MtvRule::Relative(frac) => frac * suv_statistics(pet, roi)?.0,
    };
    check_roi(pet, roi)?;
    let values = pet.values();
    let sub: Vec<usize> = roi
        .indices()
        .iter()
        .copied()
        .filter(|&i| f64::from(values[i]) >= threshold)
        .collect();
    let sub = roi.subset(sub);
    Ok((sub.volume_ml(), sub))
}

/// Total lesion glycolysis: MTV volume × SUVmean inside that MTV.
pub fn tlg(pet: &VoxelGrid, mtv_subroi: &Roi, volume_ml: f64) -> Result<f64> {
    if mtv_subroi.is_empty() {
        return Ok(0.0);
    }
    let (_, mean) = suv_statistics(pet, mtv_subroi)?;
    Ok(volume_ml * mean)
}

/// GTVp volume (ml) and maximum 3D diameter (mm).
pub fn tumor_geometry(mask: &LabelMask) -> Result<(f64, f64)> {
    let roi = roi_of(mask, |l| l == labels::GTVP).map_err(|_| Error::EmptyRoi("no GTVp voxels".into()))?;
    let geometry = mask.geometry();
    // farthest pairs lie on the hull, so surface voxels suffice
    let surface: Vec<[f64; 3]> = roi
        .indices()
        .iter()
        .copied()
        .filter(|&i| {
            let c = geometry.voxel_coords(i);
            let interior_neighbours = geometry
                .neighbours(c, false)
                .filter(|&n| mask.labels()[n] == labels::GTVP)
                .count();
            interior_neighbours < 6
        })
        .map(|i| geometry.voxel_world(geometry.voxel_coords(i)))
        .collect();
    let mut best = 0.0f64;
    for (k, a) in surface.iter().enumerate() {
        for b in &surface[k + 1..] {
            let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
            best = best.max(d2);
        }
    }
    Ok((roi.volume_ml(), best.sqrt()))
}

/// Number of connected GTVn components.
pub fn count_nodes(mask: &LabelMask, connectivity: Connectivity) -> usize {
    let member: Vec<bool> = mask.labels().iter().map(|&l| l == labels::GTVN).collect();
    components(mask.geometry().dims(), &member, connectivity).len()
}

pub const FEATURE_NAMES: [&str; 10] = [
    "tumor_volume_ml",
    "diameter_mm",
    "num_nodes",
    "suv_max",
    "suv_mean",
    "suv_peak",
    "mtv25_ml",
    "mtv40_ml",
    "tlg25",
    "tlg40",
];

/// Conventional features. Missing values (empty GTVp or empty union)
/// are `None` rather than zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConventionalFeatures {
    pub tumor_volume_ml: Option<f64>,
    pub diameter_mm: Option<f64>,
    pub num_nodes: usize,
    pub suv_max: Option<f64>,
    pub suv_mean: Option<f64>,
    pub suv_peak: Option<f64>,
    pub mtv25_ml: Option<f64>,
    pub mtv40_ml: Option<f64>,
    pub tlg25: Option<f64>,
    pub tlg40: Option<f64>,
    /// Set when the predicted mask has no GTVp.
    #[serde(default)]
    pub missing_gtvp: bool,
}

impl ConventionalFeatures {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.tumor_volume_ml,
            self.diameter_mm,
            Some(self.num_nodes as f64),
            self.suv_max,
            self.suv_mean,
            self.suv_peak,
            self.mtv25_ml,
            self.mtv40_ml,
            self.tlg25,
            self.tlg40,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConventionalConfig {
    pub mtv_absolute: f64,
    pub mtv_relative: f64,
    pub node_connectivity: Connectivity,
}

impl Default for ConventionalConfig {
    fn default() -> Self {
        Self {
            mtv_absolute: 2.5,
            mtv_relative: 0.40,
            node_connectivity: Connectivity::TwentySix,
        }
    }
}

/// All ten features for one patient.
pub fn extract_conventional(
    pet: &VoxelGrid,
    mask: &LabelMask,
    config: &ConventionalConfig,
) -> Result<ConventionalFeatures> {
    pet.geometry().require_same(mask.geometry(), "pet vs mask")?;
    let mut out = ConventionalFeatures {
        num_nodes: count_nodes(mask, config.node_connectivity),
        ..Default::default()
    };
    match tumor_geometry(mask) {
        Ok((v, d)) => {
            out.tumor_volume_ml = Some(v);
            out.diameter_mm = Some(d);
        }
        Err(Error::EmptyRoi(_)) => out.missing_gtvp = true,
        Err(e) => return Err(e),
    }
    let roi = match roi_union(mask) {
        Ok(r) => r,
        Err(Error::EmptyRoi(_)) => return Ok(out),
        Err(e) => return Err(e),
    };
    let (max, mean) = suv_statistics(pet, &roi)?;
    out.suv_max = Some(max);
    out.suv_mean = Some(mean);
    out.suv_peak = Some(suv_peak(pet, &roi)?);
    let (v25, sub25) = mtv(pet, &roi, MtvRule::Absolute(config.mtv_absolute))?;
    let (v40, sub40) = mtv(pet, &roi, MtvRule::Relative(config.mtv_relative))?;
    out.mtv25_ml = Some(v25);
    out.mtv40_ml = Some(v40);
    out.tlg25 = Some(tlg(pet, &sub25, v25)?);
    out.tlg40 = Some(tlg(pet, &sub40, v40)?);
    Ok(out)
}
