//! Head-and-neck box placement from the PET brain, then cropping to 1 mm.
//!
//!     cargo run --release --example locate

use hn_radiomics::locator::{locate, LocatorConfig};
use hn_radiomics::pipeline::crop_patient;
use hn_radiomics::synthetic::{head_neck_phantom, PhantomSpec};

fn main() -> hn_radiomics::Result<()> {
    let params = PhantomSpec::default();
    let ph = head_neck_phantom(&params)?;
    let cfg = LocatorConfig::default();
    let found = locate(&ph.pet, &ph.ct, Some(&ph.mask), &cfg);
    let bbox = found.bbox.expect("phantom has a brain");
    println!("brain pole (truth)   {:?}", params.brain_inferior_pole());
    println!("lowest brain voxel   {:?}", found.brain_lowest_mm.unwrap());
    println!("box centre           {:?}", bbox.center);
    for c in &found.checks {
        println!("  {:<22} {}", c.name, if c.passed { "ok" } else { "FAILED" });
    }

    let crop = crop_patient(&ph.pet, &ph.ct, &ph.mask, &bbox, 1.0)?;
    println!(
        "cropped grid {:?}, tumour voxels {}",
        crop.pet.geometry().dims(),
        crop.mask.count(1)
    );
    Ok(())
}
