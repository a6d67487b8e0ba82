//! ComBat on three centres with a shared scanner shift and an age effect.
//!
//!     cargo run --release --example combat

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use hn_radiomics::combat::{combat_harmonize, Covariates, FeatureMatrix};

fn centre_means(m: &FeatureMatrix, feature: usize) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for c in ["A", "B", "C"] {
        let v: Vec<f64> = (0..m.n_patients())
            .filter(|&i| m.center[i] == c)
            .map(|i| m.values[i][feature])
            .collect();
        out.push((c.to_string(), v.iter().sum::<f64>() / v.len() as f64));
    }
    out
}

fn main() -> hn_radiomics::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let shifts = [("A", 0.0, 1.0), ("B", 4.0, 1.5), ("C", -2.0, 0.7)];
    let p = 12;
    let mut m = FeatureMatrix {
        patient_ids: Vec::new(),
        feature_names: (0..p).map(|j| format!("f{j}")).collect(),
        values: Vec::new(),
        center: Vec::new(),
        covariates: Vec::new(),
    };
    for (c, shift, scale) in shifts {
        for k in 0..80 {
            let age = 45.0 + 30.0 * (k as f64 / 80.0);
            m.patient_ids.push(format!("{c}{k}"));
            m.center.push(c.to_string());
            m.covariates.push(Covariates {
                gender: (k % 2) as u8,
                age,
                weight: 70.0 + (k % 7) as f64,
            });
            m.values.push(
                (0..p)
                    .map(|_| 0.05 * age + shift + scale * noise.sample(&mut rng))
                    .collect(),
            );
        }
    }
    let h = combat_harmonize(&m)?;
    println!("feature f0 centre means");
    for ((c, before), (_, after)) in centre_means(&m, 0).into_iter().zip(centre_means(&h, 0)) {
        println!("  {c}: {before:>7.3} -> {after:>7.3}");
    }
    Ok(())
}
