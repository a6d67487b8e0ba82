//! Per-case and aggregated Dice, and the training losses on a soft
//! prediction.
//!
//!     cargo run --release --example dice

use hn_radiomics::metrics::{aggregated_dice, soft_dice_loss, total_loss, SoftSegmentation};
use hn_radiomics::volume::{GridGeometry, LabelMask};

fn blob(n: usize, count: usize, offset: usize) -> LabelMask {
    let g = GridGeometry::axis_aligned([n, n, 2 * n], [1.0; 3], [0.0; 3]).unwrap();
    let mut m = LabelMask::empty(g);
    for i in offset..offset + count {
        m.set([i % n, (i / n) % n, i / (n * n)], 1);
    }
    m
}

fn main() -> hn_radiomics::Result<()> {
    // a tiny perfect hit and a large complete miss
    let cases = vec![
        ("small".to_string(), blob(10, 2, 0), blob(10, 2, 0)),
        ("large".to_string(), blob(10, 0, 0), blob(10, 200, 0)),
    ];
    let r = aggregated_dice(&cases, &[1])?;
    for c in &r.per_case {
        println!("{:<6} dice {:.3}", c.case_id, c.dice[0].1);
    }
    println!(
        "mean of cases {:.3}, aggregated {:.3}",
        r.mean_per_case[0], r.aggregated[0]
    );

    let truth = vec![0u8, 1, 2, 1];
    let probs = vec![
        0.9, 0.05, 0.05, //
        0.2, 0.7, 0.1, //
        0.1, 0.2, 0.7, //
        0.3, 0.6, 0.1,
    ];
    let s = SoftSegmentation::new(3, probs, truth)?;
    println!(
        "soft dice loss {:.4}, total {:.4}",
        soft_dice_loss(&s).value,
        total_loss(&s).value
    );
    Ok(())
}
