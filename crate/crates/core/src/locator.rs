//! Placement of the fixed oropharyngeal crop box from PET intensity.
//!
//! The brain is found as the largest bright connected region among the most
//! superior axial slices; the box centre sits a fixed distance inferior and
//! anterior of the brain's lowest voxel.

use serde::{Deserialize, Serialize};

use crate::components::{components, Connectivity};
use crate::error::{Error, Result};
use crate::volume::{labels, BoundingBoxMM, LabelMask, VoxelGrid, HN_BOX_SIZE_MM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocatorConfig {
    /// Brain voxels have SUV strictly above this value.
    pub suv_threshold: f64,
    /// Fraction of axial slices, counted from the superior end, searched for the brain.
    pub top_fraction: f64,
    pub shift_inferior_mm: f64,
    pub shift_anterior_mm: f64,
    pub box_size_mm: f64,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        Self {
            suv_threshold: 3.0,
            top_fraction: 0.3,
            shift_inferior_mm: 30.0,
            shift_anterior_mm: 30.0,
            box_size_mm: HN_BOX_SIZE_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainRegion {
    /// Linear voxel indices of the selected component.
    pub voxels: Vec<usize>,
    pub lowest_voxel: [usize; 3],
    /// World position of the most inferior voxel centre.
    pub lowest_world: [f64; 3],
}

/// Finds the brain as the largest 26-connected component of
/// `SUV > suv_threshold` inside the superior `top_fraction` of axial slices.
pub fn detect_brain(pet: &VoxelGrid, suv_threshold: f64, top_fraction: f64) -> Result<BrainRegion> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "top_fraction must be in (0, 1], got {top_fraction}"
        )));
    }
    let geometry = pet.geometry();
    let dims = geometry.dims();
    let (axis, increasing) = geometry.superior_axis();
    let n = dims[axis];
    let kept = ((n as f64 * top_fraction).ceil() as usize).clamp(1, n);
    let slice_range = if increasing { n - kept..n } else { 0..kept };

    let member: Vec<bool> = pet
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| f64::from(v) > suv_threshold && slice_range.contains(&geometry.voxel_coords(i)[axis]))
        .collect();

    let comps = components(dims, &member, Connectivity::TwentySix);
    // first component wins ties, so scan order decides
    let mut best: Option<Vec<usize>> = None;
    for c in comps {
        if best.as_ref().is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    let voxels =
        best.ok_or_else(|| Error::Detection(format!("no voxel above SUV {suv_threshold} in the superior slices")))?;

    let (lowest_linear, lowest_world) = voxels
        .iter()
        .map(|&i| (i, geometry.voxel_world(geometry.voxel_coords(i))))
        .min_by(|a, b| a.1[2].total_cmp(&b.1[2]).then(a.0.cmp(&b.0)))
        .expect("component is non-empty");

    let mut voxels = voxels;
    voxels.sort_unstable();
    Ok(BrainRegion {
        voxels,
        lowest_voxel: geometry.voxel_coords(lowest_linear),
        lowest_world,
    })
}

/// Box centred `shift_inferior_mm` below and `shift_anterior_mm` in front of
/// the brain's lowest point (world +y anterior, +z superior).
pub fn place_box(brain_lowest_mm: [f64; 3], config: &LocatorConfig) -> BoundingBoxMM {
    let [x, y, z] = brain_lowest_mm;
    BoundingBoxMM {
        center: [x, y + config.shift_anterior_mm, z - config.shift_inferior_mm],
        size: [config.box_size_mm; 3],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub pass: bool,
    pub gtvp_outside: usize,
    pub gtvn_outside: usize,
    /// Labels with at least one voxel outside the box.
    pub failing_labels: Vec<u8>,
}

/// Checks that every GTVp/GTVn voxel centre lies inside `bbox`.
pub fn validate_containment(bbox: &BoundingBoxMM, mask: &LabelMask) -> ContainmentReport {
    let geometry = mask.geometry();
    let mut outside = [0usize; 3];
    for (i, &l) in mask.labels().iter().enumerate() {
        if l == labels::BACKGROUND {
            continue;
        }
        if !bbox.contains(geometry.voxel_world(geometry.voxel_coords(i))) {
            outside[l as usize] += 1;
        }
    }
    let failing_labels: Vec<u8> = [labels::GTVP, labels::GTVN]
        .into_iter()
        .filter(|&l| outside[l as usize] > 0)
        .collect();
    ContainmentReport {
        pass: failing_labels.is_empty(),
        gtvp_outside: outside[labels::GTVP as usize],
        gtvn_outside: outside[labels::GTVN as usize],
        failing_labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SanityFlag {
    PetAllZero,
    CtAllZero,
    PetNegativeValues,
    PetSuvMaxBelow,
    CtRangeImplausible,
}

impl SanityFlag {
    pub fn name(self) -> &'static str {
        match self {
            SanityFlag::PetAllZero => "pet_all_zero",
            SanityFlag::CtAllZero => "ct_all_zero",
            SanityFlag::PetNegativeValues => "pet_negative_values",
            SanityFlag::PetSuvMaxBelow => "pet_suv_max_below",
            SanityFlag::CtRangeImplausible => "ct_range_implausible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    pub pass: bool,
    pub flags: Vec<SanityFlag>,
}

pub const MIN_PET_SUV_MAX: f64 = 0.5;

/// Intensity-range checks on a PET/CT pair.
pub fn sanity_check(pet: &VoxelGrid, ct: &VoxelGrid) -> SanityReport {
    let mut flags = Vec::new();
    let (pet_min, pet_max) = pet.min_max();
    let (ct_min, ct_max) = ct.min_max();
    if pet.values().iter().all(|&v| v == 0.0) {
        flags.push(SanityFlag::PetAllZero);
    }
    if ct.values().iter().all(|&v| v == 0.0) {
        flags.push(SanityFlag::CtAllZero);
    }
    if pet_min < 0.0 {
        flags.push(SanityFlag::PetNegativeValues);
    }
    if f64::from(pet_max) < MIN_PET_SUV_MAX {
        flags.push(SanityFlag::PetSuvMaxBelow);
    }
    if ct_max < -500.0 || ct_min > 500.0 {
        flags.push(SanityFlag::CtRangeImplausible);
    }
    SanityReport {
        pass: flags.is_empty(),
        flags,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocatorMode {
    Automatic,
    Override,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocatorResult {
    #[serde(rename = "box")]
    pub bbox: Option<BoundingBoxMM>,
    pub mode: LocatorMode,
    pub brain_lowest_mm: Option<[f64; 3]>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

impl LocatorResult {
    /// Whether the patient should be queued for a manual centre.
    pub fn needs_review(&self) -> bool {
        self.mode == LocatorMode::Failed || self.checks.iter().any(|c| !c.passed)
    }
}

/// Manual placement: a box of the configured size at `center_mm`.
pub fn override_box(center_mm: [f64; 3], config: &LocatorConfig) -> LocatorResult {
    LocatorResult {
        bbox: Some(BoundingBoxMM {
            center: center_mm,
            size: [config.box_size_mm; 3],
        }),
        mode: LocatorMode::Override,
        brain_lowest_mm: None,
        checks: Vec::new(),
        message: None,
    }
}

/// Full automatic placement with sanity and (optional) containment checks.
///
/// Detection failure does not error: the result has mode `failed` so a batch
/// can continue and report the patient for a manual override.
pub fn locate(pet: &VoxelGrid, ct: &VoxelGrid, mask: Option<&LabelMask>, config: &LocatorConfig) -> LocatorResult {
    let sanity = sanity_check(pet, ct);
    let all_flags = [
        SanityFlag::PetAllZero,
        SanityFlag::CtAllZero,
        SanityFlag::PetNegativeValues,
        SanityFlag::PetSuvMaxBelow,
        SanityFlag::CtRangeImplausible,
    ];
    let mut checks: Vec<Check> = all_flags
        .iter()
        .map(|f| Check {
            name: f.name().to_string(),
            passed: !sanity.flags.contains(f),
        })
        .collect();

    match detect_brain(pet, config.suv_threshold, config.top_fraction) {
        Ok(brain) => {
            let bbox = place_box(brain.lowest_world, config);
            if let Some(mask) = mask {
                let report = validate_containment(&bbox, mask);
                checks.push(Check {
                    name: "gtvp_contained".into(),
                    passed: report.gtvp_outside == 0,
                });
                checks.push(Check {
                    name: "gtvn_contained".into(),
                    passed: report.gtvn_outside == 0,
                });
            }
            LocatorResult {
                bbox: Some(bbox),
                mode: LocatorMode::Automatic,
                brain_lowest_mm: Some(brain.lowest_world),
                checks,
                message: None,
            }
        }
        Err(e) => LocatorResult {
            bbox: None,
            mode: LocatorMode::Failed,
            brain_lowest_mm: None,
            checks,
            message: Some(e.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::GridGeometry;

    fn pet_geometry() -> GridGeometry {
        GridGeometry::axis_aligned([40, 40, 50], [2.0; 3], [-40.0, -40.0, -50.0]).unwrap()
    }

    /// Bright ellipsoid in the top slices, background 0.5.
    fn phantom(center: [f64; 3], radii: [f64; 3]) -> VoxelGrid {
        let g = pet_geometry();
        let g2 = g.clone();
        VoxelGrid::from_fn(g, |ijk| {
            let w = g2.voxel_world(ijk);
            let r: f64 = (0..3).map(|a| ((w[a] - center[a]) / radii[a]).powi(2)).sum();
            if r <= 1.0 {
                8.0
            } else {
                0.5
            }
        })
    }

    #[test]
    fn ellipsoid_phantom_pole_matches_direct_scan() {
        let center = [2.0, -4.0, 34.0];
        let radii = [14.0, 18.0, 10.0];
        let pet = phantom(center, radii);
        let brain = detect_brain(&pet, 3.0, 0.3).unwrap();

        // oracle: every voxel of the ellipsoid, scanned directly
        let g = pet.geometry();
        let inside: Vec<usize> = (0..g.n_voxels())
            .filter(|&i| {
                let w = g.voxel_world(g.voxel_coords(i));
                (0..3).map(|a| ((w[a] - center[a]) / radii[a]).powi(2)).sum::<f64>() <= 1.0
            })
            .collect();
        assert_eq!(brain.voxels, inside);
        let min_z = inside
            .iter()
            .map(|&i| g.voxel_world(g.voxel_coords(i))[2])
            .fold(f64::INFINITY, f64::min);
        assert_eq!(brain.lowest_world[2], min_z);
        assert!(brain.lowest_world[2] >= center[2] - radii[2]);
        assert!(brain.lowest_world[2] < center[2] - radii[2] + 2.0);
    }

    #[test]
    fn all_zero_pet_fails_detection() {
        let pet = VoxelGrid::filled(pet_geometry(), 0.0);
        assert!(matches!(detect_brain(&pet, 3.0, 0.3), Err(Error::Detection(_))));
    }

    #[test]
    fn largest_blob_is_selected() {
        let g = pet_geometry();
        let mut pet = VoxelGrid::filled(g, 0.5);
        // 100-voxel block and 10-voxel block in the top slices
        for z in 45..49 {
            for y in 5..10 {
                for x in 5..10 {
                    pet.set([x, y, z], 6.0);
                }
            }
        }
        for x in 30..40 {
            pet.set([x, 30, 48], 9.0);
        }
        let brain = detect_brain(&pet, 3.0, 0.3).unwrap();
        assert_eq!(brain.voxels.len(), 100);
        assert_eq!(brain.lowest_voxel[2], 45);
    }

    #[test]
    fn bright_region_below_search_window_is_ignored() {
        let g = pet_geometry();
        let mut pet = VoxelGrid::filled(g, 0.5);
        pet.set([10, 10, 2], 20.0);
        assert!(detect_brain(&pet, 3.0, 0.3).is_err());
    }

    #[test]
    fn place_box_shifts_inferior_and_anterior() {
        let cfg = LocatorConfig::default();
        let b = place_box([0.0, 0.0, 0.0], &cfg);
        assert_eq!(b.center, [0.0, 30.0, -30.0]);
        assert_eq!(b.size, [224.0; 3]);
        let t = [12.5, -7.0, 99.0];
        let bt = place_box(t, &cfg);
        for a in 0..3 {
            assert!((bt.center[a] - (b.center[a] + t[a])).abs() < 1e-12);
        }
    }

    #[test]
    fn containment_cases() {
        let g = GridGeometry::axis_aligned([30, 30, 30], [1.0; 3], [0.0; 3]).unwrap();
        let bbox = BoundingBoxMM::new([10.0, 10.0, 10.0], [10.0, 10.0, 10.0]).unwrap();
        let mut mask = LabelMask::empty(g);
        assert!(validate_containment(&bbox, &mask).pass);
        mask.set([10, 10, 10], labels::GTVP);
        assert!(validate_containment(&bbox, &mask).pass);
        // face at x = 15; voxel centre at 16 is 1 mm outside
        mask.set([16, 10, 10], labels::GTVN);
        let r = validate_containment(&bbox, &mask);
        assert!(!r.pass);
        assert_eq!(r.failing_labels, vec![labels::GTVN]);
        assert_eq!(r.gtvn_outside, 1);
        assert_eq!(r.gtvp_outside, 0);
    }

    #[test]
    fn sanity_flags() {
        let g = pet_geometry();
        let normal_pet = phantom([0.0, 0.0, 30.0], [10.0; 3]);
        let ct = VoxelGrid::from_fn(g.clone(), |[x, _, _]| -1000.0 + 2500.0 * x as f32 / 39.0);
        let r = sanity_check(&normal_pet, &ct);
        assert!(r.pass, "{:?}", r.flags);

        let zero = VoxelGrid::filled(g.clone(), 0.0);
        assert!(sanity_check(&zero, &ct).flags.contains(&SanityFlag::PetAllZero));

        let dim = VoxelGrid::filled(g.clone(), 0.2);
        let r = sanity_check(&dim, &ct);
        assert_eq!(r.flags, vec![SanityFlag::PetSuvMaxBelow]);

        let air = VoxelGrid::filled(g, -1000.0);
        assert!(sanity_check(&normal_pet, &air)
            .flags
            .contains(&SanityFlag::CtRangeImplausible));
    }

    #[test]
    fn override_contract() {
        let cfg = LocatorConfig::default();
        let r = override_box([10.0, 20.0, 30.0], &cfg);
        assert_eq!(r.mode, LocatorMode::Override);
        assert!(r.checks.is_empty());
        let b = r.bbox.unwrap();
        assert_eq!(b.center, [10.0, 20.0, 30.0]);
        assert_eq!(b.size, [224.0; 3]);

        // a mask within 100 mm of the centre is contained
        let g = GridGeometry::axis_aligned([21, 21, 21], [10.0; 3], [-90.0, -80.0, -70.0]).unwrap();
        let mut mask = LabelMask::empty(g);
        mask.set([0, 0, 0], labels::GTVP);
        mask.set([20, 20, 20], labels::GTVN);
        assert!(validate_containment(&b, &mask).pass);
    }

    #[test]
    fn locate_reports_failure_without_error() {
        let g = pet_geometry();
        let pet = VoxelGrid::filled(g.clone(), 0.0);
        let ct = VoxelGrid::filled(g, 40.0);
        let r = locate(&pet, &ct, None, &LocatorConfig::default());
        assert_eq!(r.mode, LocatorMode::Failed);
        assert!(r.needs_review());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"mode\":\"failed\""));
    }
}
