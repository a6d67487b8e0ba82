//! NIfTI round trip and resampling of a phantom PET.
//!
//!     cargo run --release --example volume_io

use hn_radiomics::synthetic::{head_neck_phantom, PhantomSpec};
use hn_radiomics::volume::{load_volume, resample, save_volume, Interpolation};

fn main() -> hn_radiomics::Result<()> {
    let ph = head_neck_phantom(&PhantomSpec::default())?;
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("pet.nii.gz");
    save_volume(&ph.pet, &path)?;
    let back = load_volume(&path)?;
    assert_eq!(back.values(), ph.pet.values());
    println!(
        "dims {:?} spacing {:?}",
        back.geometry().dims(),
        back.geometry().spacing()
    );

    for spacing in [[1.0; 3], [4.0, 4.0, 3.0]] {
        let r = resample(&back, spacing, Interpolation::Linear)?;
        let (lo, hi) = r.min_max();
        println!(
            "{spacing:?} -> dims {:?}, SUV range {lo:.2}..{hi:.2}",
            r.geometry().dims()
        );
    }
    Ok(())
}
