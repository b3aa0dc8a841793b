//! Appearance probabilities between whitened HOG descriptors: a patch and its
//! shifted copy score higher than an unrelated patch.

use proposal_flow::prelude::*;
use proposal_flow::synthetic::Texture;

fn main() -> Result<()> {
    let img = Texture::seeded(4).render(160, 120)?;
    let boxes = [
        BBox::new(20.0, 20.0, 60.0, 60.0)?,
        BBox::new(22.0, 21.0, 62.0, 61.0)?,
        BBox::new(100.0, 60.0, 140.0, 100.0)?,
    ];
    let set = ProposalSet::from_boxes(160, 120, &boxes)?;
    let raw = describe_proposals(&img, &set, DEFAULT_PATCH_SIDE)?;
    println!("{} descriptors of dimension {}", raw.len(), raw.dim());
    let white = whiten(&[&raw])?;
    let a = appearance_matrix(&white[0], &white[0])?;
    for i in 0..3 {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:.3}")).collect();
        println!("box {i}: {}", row.join("  "));
    }
    Ok(())
}
