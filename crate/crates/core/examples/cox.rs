//! Cox regression, Lasso-Cox and Harrell's C-index on simulated survival.
//!
//!     cargo run --release --example cox

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use hn_radiomics::survival::{concordance_index, cox_fit, lasso_cox, LassoConfig, SurvivalRecord};

fn main() -> hn_radiomics::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let beta = [0.8, -0.5, 0.0, 0.0, 0.0];
    let names: Vec<String> = (0..beta.len()).map(|j| format!("x{j}")).collect();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for _ in 0..400 {
        let x: Vec<f64> = beta.iter().map(|_| unit.sample(&mut rng)).collect();
        let lp: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let t = Exp::new(0.1 * lp.exp()).unwrap().sample(&mut rng);
        let c = rng.random_range(5.0..40.0);
        records.push(SurvivalRecord::new(t.min(c), t <= c)?);
        rows.push(x);
    }

    let full = cox_fit(&names, &rows, &records)?;
    println!("Newton fit ({} iterations)", full.iterations);
    for (n, b) in names.iter().zip(full.raw_coefficients()) {
        println!("  {n}: {b:>7.3}");
    }
    let risks = full.risk_scores(&names, &rows)?;
    println!("apparent C-index {:.3}", concordance_index(&risks, &records)?);

    let lasso = lasso_cox(&names, &rows, &records, &LassoConfig::default())?;
    println!("lasso lambda {:.4} keeps {:?}", lasso.lambda, lasso.selected);
    Ok(())
}
