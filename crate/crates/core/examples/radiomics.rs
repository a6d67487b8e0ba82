//! PET and CT radiomics of one phantom; prints the features used by the
//! fitted models and a per-family count.
//!
//!     cargo run --release --example radiomics

use std::collections::BTreeMap;

use hn_radiomics::radiomics::{extract_all, RadiomicsConfig, KEY_FEATURES};
use hn_radiomics::synthetic::{head_neck_phantom, PhantomSpec};

fn main() -> hn_radiomics::Result<()> {
    let ph = head_neck_phantom(&PhantomSpec::default())?;
    let v = extract_all(&ph.pet, &ph.ct, &ph.mask, &RadiomicsConfig::default())?;

    let mut families = BTreeMap::<String, usize>::new();
    for name in v.names() {
        let family = name.splitn(3, '-').take(2).collect::<Vec<_>>().join("-");
        *families.entry(family).or_default() += 1;
    }
    println!("{} features", v.len());
    for (f, n) in &families {
        println!("  {f:<16} {n}");
    }
    println!();
    for name in KEY_FEATURES {
        println!("{name:<40} {:.5}", v.get(name).unwrap_or(f64::NAN));
    }
    if !v.flags.is_empty() {
        println!("flags: {:?}", v.flags);
    }
    Ok(())
}
