//! The ten conventional PET features of one phantom.
//!
//!     cargo run --release --example conventional

use hn_radiomics::conventional::{extract_conventional, ConventionalConfig, FEATURE_NAMES};
use hn_radiomics::synthetic::{head_neck_phantom, PhantomSpec};

fn main() -> hn_radiomics::Result<()> {
    let ph = head_neck_phantom(&PhantomSpec::default())?;
    let f = extract_conventional(&ph.pet, &ph.mask, &ConventionalConfig::default())?;
    for (name, v) in FEATURE_NAMES.iter().zip(f.values()) {
        match v {
            Some(v) => println!("{name:<16} {v:>10.3}"),
            None => println!("{name:<16} {:>10}", "missing"),
        }
    }
    Ok(())
}
