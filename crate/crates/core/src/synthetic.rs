//! Seeded synthetic data: head-and-neck PET/CT phantoms and feature cohorts
//! with a known survival signal and injected centre effects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};

use crate::combat::Covariates;
use crate::conventional::FEATURE_NAMES;
use crate::error::Result;
use crate::pipeline::{ClinicalRecord, FeatureTable};
use crate::survival::SurvivalRecord;
use crate::volume::{labels, GridGeometry, LabelMask, VoxelGrid};

/// Training centres with their patient counts in the reference cohort.
pub const TRAINING_CENTERS: [(&str, usize); 7] = [
    ("CHUM", 56),
    ("CHUP", 44),
    ("CHUS", 72),
    ("CHUV", 47),
    ("MDA", 197),
    ("HGJ", 55),
    ("HMR", 18),
];

/// Centres seen only at test time.
pub const TEST_CENTERS: [&str; 2] = ["USZ", "CHB"];

/// Phantom layout. World axes are RAS+: +y anterior, +z superior.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub brain_center: [f64; 3],
    pub brain_radii: [f64; 3],
    pub brain_suv: f32,
    /// Primary tumour centre relative to the brain's inferior pole.
    pub tumour_offset: [f64; 3],
    pub tumour_radius: f64,
    pub tumour_suv: f32,
    /// Node centres relative to the brain's inferior pole.
    pub node_offsets: Vec<[f64; 3]>,
    pub node_radius: f64,
    pub node_suv: f32,
    pub background_suv: f32,
    /// Multiplicative PET noise SD and additive CT noise SD in HU.
    pub pet_noise: f64,
    pub ct_noise: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [100, 100, 110],
            spacing: [2.0; 3],
            origin: [-99.0, -99.0, -109.0],
            brain_center: [1.0, 1.0, 77.0],
            brain_radii: [55.0, 65.0, 26.0],
            brain_suv: 9.0,
            tumour_offset: [6.0, 30.0, -45.0],
            tumour_radius: 11.0,
            tumour_suv: 12.0,
            node_offsets: vec![[-25.0, 25.0, -60.0], [28.0, 20.0, -68.0]],
            node_radius: 6.0,
            node_suv: 6.0,
            background_suv: 1.0,
            pet_noise: 0.1,
            ct_noise: 15.0,
            seed: 1,
        }
    }
}

impl PhantomSpec {
    /// Default layout with the brain moved by up to `max_steps` voxels in x
    /// and y and half that in z. Moves are whole voxels so the inferior pole
    /// stays on a voxel centre and is the unique lowest brain voxel.
    pub fn randomized(rng: &mut impl Rng, max_steps: i32) -> Self {
        let mut s = Self::default();
        let mut step = |a: usize, m: i32| rng.random_range(-m..=m) as f64 * s.spacing[a];
        let d = [step(0, max_steps), step(1, max_steps), step(2, max_steps / 2)];
        for (c, d) in s.brain_center.iter_mut().zip(d) {
            *c += d;
        }
        s.seed = rng.random();
        s
    }

    /// Analytic inferior pole of the brain ellipsoid.
    pub fn brain_inferior_pole(&self) -> [f64; 3] {
        let [x, y, z] = self.brain_center;
        [x, y, z - self.brain_radii[2]]
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::axis_aligned(self.dims, self.spacing, self.origin)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub pet: VoxelGrid,
    pub ct: VoxelGrid,
    /// Ground truth: 1 primary tumour, 2 nodes.
    pub mask: LabelMask,
}

fn inside_ellipsoid(p: [f64; 3], c: [f64; 3], r: [f64; 3]) -> bool {
    (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Body cylinder with brain, tumour and nodes; noisy PET and CT.
pub fn head_neck_phantom(params: &PhantomSpec) -> Result<Phantom> {
    let g = params.geometry()?;
    let pole = params.brain_inferior_pole();
    let tumour = add(pole, params.tumour_offset);
    let nodes: Vec<[f64; 3]> = params.node_offsets.iter().map(|&o| add(pole, o)).collect();
    let body_radius = 85.0;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let n = g.n_voxels();
    let mut pet = vec![0f32; n];
    let mut ct = vec![-1000f32; n];
    let mut mask = vec![labels::BACKGROUND; n];
    for (i, ((p, c), m)) in pet.iter_mut().zip(ct.iter_mut()).zip(mask.iter_mut()).enumerate() {
        let w = g.voxel_world(g.voxel_coords(i));
        let noise_pet = 1.0 + params.pet_noise * unit.sample(&mut rng);
        let noise_ct = params.ct_noise * unit.sample(&mut rng);
        if w[0].hypot(w[1]) > body_radius {
            continue;
        }
        let (mut suv, mut hu) = (params.background_suv, 40.0f32);
        if inside_ellipsoid(w, params.brain_center, params.brain_radii) {
            suv = params.brain_suv;
            hu = 30.0;
        }
        if let Some(k) = nodes
            .iter()
            .position(|&c| inside_ellipsoid(w, c, [params.node_radius; 3]))
        {
            // radial falloff gives the ROI some texture
            let r = (0..3).map(|a| (w[a] - nodes[k][a]).powi(2)).sum::<f64>().sqrt() / params.node_radius;
            suv = params.node_suv * (1.0 - 0.4 * r) as f32;
            hu = 55.0;
            *m = labels::GTVN;
        }
        if inside_ellipsoid(w, tumour, [params.tumour_radius; 3]) {
            let r = (0..3).map(|a| (w[a] - tumour[a]).powi(2)).sum::<f64>().sqrt() / params.tumour_radius;
            suv = params.tumour_suv * (1.0 - 0.5 * r) as f32;
            hu = 60.0 + 20.0 * r as f32;
            *m = labels::GTVP;
        }
        *p = (f64::from(suv) * noise_pet).max(0.0) as f32;
        *c = hu + noise_ct as f32;
    }
    Ok(Phantom {
        pet: VoxelGrid::new(g.clone(), pet)?,
        ct: VoxelGrid::new(g.clone(), ct)?,
        mask: LabelMask::new(g, mask)?,
    })
}

/// Layout of a synthetic feature cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub centers: Vec<(String, usize)>,
    /// Log-hazard ratio per signal feature, in standardised units.
    pub signal_betas: Vec<f64>,
    pub n_noise: usize,
    /// SD of the per-centre additive shift, in feature SD units.
    pub batch_shift_sd: f64,
    /// Per-centre multiplicative scale is drawn from `[1/s, s]`.
    pub batch_scale: f64,
    /// Per-feature deviation from the centre's common shift (additive) and
    /// scale (log).
    pub batch_jitter: f64,
    /// Age effect on every radiomics feature per year of age.
    pub age_slope: f64,
    pub baseline_hazard: f64,
    /// Rate of the exponential censoring time.
    pub censoring_rate: f64,
    /// Pairwise correlation of noise features within a block of four.
    pub noise_correlation: f64,
    pub with_conventional: bool,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            centers: TRAINING_CENTERS.iter().map(|&(c, n)| (c.to_string(), n)).collect(),
            signal_betas: vec![2.0, -1.8],
            n_noise: 38,
            batch_shift_sd: 2.0,
            batch_scale: 1.8,
            batch_jitter: 0.1,
            age_slope: 0.02,
            baseline_hazard: 0.02,
            censoring_rate: 0.01,
            noise_correlation: 0.5,
            with_conventional: true,
            seed: 20220901,
        }
    }
}

impl CohortSpec {
    /// `n` patients over the seven training centres, proportional to the
    /// reference counts.
    pub fn with_patients(n: usize) -> Self {
        let total: usize = TRAINING_CENTERS.iter().map(|c| c.1).sum();
        let mut centers: Vec<(String, usize)> = TRAINING_CENTERS
            .iter()
            .map(|&(c, k)| (c.to_string(), k * n / total))
            .collect();
        let short = n - centers.iter().map(|c| c.1).sum::<usize>();
        for c in centers.iter_mut().take(short) {
            c.1 += 1;
        }
        Self {
            centers,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub clinical: Vec<ClinicalRecord>,
    pub features: FeatureTable,
    /// Names of the features that drive the hazard.
    pub signal: Vec<String>,
    /// Linear predictor before batch effects, per patient.
    pub true_risk: Vec<f64>,
}

impl SyntheticCohort {
    /// Deterministic split: every `k`-th patient of each centre goes to test.
    pub fn split_every(&self, k: usize) -> (Vec<String>, Vec<String>) {
        let mut seen = std::collections::HashMap::<&str, usize>::new();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for r in &self.clinical {
            let c = seen.entry(r.center.as_str()).or_default();
            *c += 1;
            if c.is_multiple_of(k) {
                test.push(r.patient_id.clone());
            } else {
                train.push(r.patient_id.clone());
            }
        }
        (train, test)
    }
}

/// Radiomics-style name of synthetic feature `j`.
pub fn synthetic_feature_name(j: usize) -> String {
    let modality = if j.is_multiple_of(2) { "CT" } else { "PET" };
    format!("{modality}-SYN-f{j:02}")
}

/// Latent standard-normal features drive an exponential proportional-hazards
/// outcome; observed radiomics are the latents distorted by a centre shift
/// and scale shared across features, plus an age effect. Conventional columns, when requested, are
/// positive transforms of the first signal latent and noise.
pub fn synthetic_cohort(params: &CohortSpec) -> Result<SyntheticCohort> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let n_signal = params.signal_betas.len();
    let p = n_signal + params.n_noise;
    let names: Vec<String> = (0..p).map(synthetic_feature_name).collect();
    let mut all_names = names.clone();
    if params.with_conventional {
        all_names.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    }

    let scale = Uniform::new_inclusive(1.0 / params.batch_scale, params.batch_scale).expect("scale range");
    let effects: Vec<(Vec<f64>, Vec<f64>)> = params
        .centers
        .iter()
        .map(|_| {
            // scanner effects move all features of a centre together
            let common_shift = params.batch_shift_sd * unit.sample(&mut rng);
            let common_scale = scale.sample(&mut rng);
            let shift = (0..p)
                .map(|_| common_shift + params.batch_jitter * unit.sample(&mut rng))
                .collect();
            let sc = (0..p)
                .map(|_| common_scale * (params.batch_jitter * unit.sample(&mut rng)).exp())
                .collect();
            (shift, sc)
        })
        .collect();

    let censor = Exp::new(params.censoring_rate).expect("positive rate");
    let rho = params.noise_correlation.clamp(0.0, 0.99);
    let mut clinical = Vec::new();
    let mut table = FeatureTable::new(all_names);
    let mut true_risk = Vec::new();
    for (ci, (center, count)) in params.centers.iter().enumerate() {
        for k in 0..*count {
            let id = format!("{center}-{:03}", k + 1);
            let cov = Covariates {
                gender: u8::from(rng.random_bool(0.8)),
                age: 60.0 + 9.0 * unit.sample(&mut rng),
                weight: 78.0 + 14.0 * unit.sample(&mut rng),
            };
            let mut latent: Vec<f64> = (0..n_signal).map(|_| unit.sample(&mut rng)).collect();
            // noise in blocks of four sharing a common factor
            let mut shared = 0.0;
            for j in 0..params.n_noise {
                if j % 4 == 0 {
                    shared = unit.sample(&mut rng);
                }
                latent.push(rho.sqrt() * shared + (1.0 - rho).sqrt() * unit.sample(&mut rng));
            }
            let lp: f64 = params.signal_betas.iter().zip(&latent).map(|(b, x)| b * x).sum();
            let event_time = Exp::new(params.baseline_hazard * lp.exp())
                .expect("positive hazard")
                .sample(&mut rng);
            let censor_time = censor.sample(&mut rng);
            let survival = SurvivalRecord::new(event_time.min(censor_time).max(1e-3), event_time <= censor_time)?;

            let (shift, sc) = &effects[ci];
            let mut row: Vec<Option<f64>> = (0..p)
                .map(|j| Some(latent[j] * sc[j] + shift[j] + params.age_slope * (cov.age - 60.0)))
                .collect();
            if params.with_conventional {
                let x = latent[0];
                let size = (2.5 + 0.3 * x + 0.5 * unit.sample(&mut rng)).exp();
                let suv_max = 8.0 + 2.0 * unit.sample(&mut rng).abs();
                let suv_mean = 0.55 * suv_max;
                let mtv25 = 0.8 * size;
                let mtv40 = 0.5 * size;
                let nodes = (1.5 + 0.4 * x + 0.8 * unit.sample(&mut rng)).round().max(0.0);
                row.extend([
                    Some(size),
                    Some(10.0 * size.cbrt() + rng.random::<f64>()),
                    Some(nodes),
                    Some(suv_max),
                    Some(suv_mean),
                    Some(0.8 * suv_max),
                    Some(mtv25),
                    Some(mtv40),
                    Some(mtv25 * suv_mean),
                    Some(mtv40 * suv_mean * 1.2),
                ]);
            }
            table.push_row(&id, row)?;
            clinical.push(ClinicalRecord {
                patient_id: id,
                center: center.clone(),
                covariates: cov,
                survival: Some(survival),
            });
            true_risk.push(lp);
        }
    }
    Ok(SyntheticCohort {
        clinical,
        features: table,
        signal: names[..n_signal].to_vec(),
        true_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locator::{locate, LocatorConfig};

    #[test]
    fn phantom_locates_near_pole() {
        let params = PhantomSpec::default();
        let ph = head_neck_phantom(&params).unwrap();
        let loc = locate(&ph.pet, &ph.ct, Some(&ph.mask), &LocatorConfig::default());
        let b = loc.bbox.unwrap();
        let pole = params.brain_inferior_pole();
        let want = [pole[0], pole[1] + 30.0, pole[2] - 30.0];
        for a in 0..3 {
            assert!(
                (b.center[a] - want[a]).abs() <= params.spacing[a],
                "{:?} vs {want:?}",
                b.center
            );
        }
        assert!(!loc.needs_review(), "{:?}", loc.checks);
        assert!(ph.mask.count(labels::GTVP) > 100);
        assert!(ph.mask.count(labels::GTVN) > 20);
    }

    #[test]
    fn cohort_shape_and_determinism() {
        let params = CohortSpec::with_patients(500);
        let a = synthetic_cohort(&params).unwrap();
        let b = synthetic_cohort(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clinical.len(), 500);
        assert_eq!(a.features.names.len(), 40 + 10);
        let events = a.clinical.iter().filter(|c| c.survival.unwrap().event).count();
        assert!(events > 150 && events < 450, "{events}");
    }
}
