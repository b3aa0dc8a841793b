//! Dense flow from region matches on a translated texture, with and without
//! hole filling, and the backward-warped target. Target proposals are the
//! source windows moved by the translation, so a correct match exists for
//! every region.

use proposal_flow::prelude::*;
use proposal_flow::synthetic::translated_pair;

fn main() -> Result<()> {
    let (t, (w, h)) = ([6.0, 3.0], (96, 72));
    let (src, dst) = translated_pair(w, h, t, 2)?;
    let inner = sliding_window(w - 6, h - 3, 500)?.boxes();
    let moved: Vec<BBox> = inner.iter().map(|b| b.translate(t[0], t[1])).collect();
    let rs = ProposalSet::from_boxes(w, h, &inner)?;
    let rd = ProposalSet::from_boxes(w, h, &moved)?;
    let fs = describe_proposals(&src, &rs, DEFAULT_PATCH_SIDE)?;
    let fd = describe_proposals(&dst, &rd, DEFAULT_PATCH_SIDE)?;
    let white = whiten(&[&fs, &fd])?;
    let a = appearance_matrix(&white[0], &white[1])?;
    let asg = lom(&rs, &rd, &a, &GaussianKernel::for_image(w, h))?;

    for fill in [FillMode::None, FillMode::Nearest, FillMode::default()] {
        let flow = densify(&rs, &rd, &asg, &src, fill)?;
        let epe = flow.mean_epe_valid(|_, _| t).unwrap_or(f64::NAN);
        let mean_all = (0..flow.len())
            .map(|i| ((flow.u[i] as f64 - t[0]).powi(2) + (flow.v[i] as f64 - t[1]).powi(2)).sqrt())
            .sum::<f64>()
            / flow.len() as f64;
        println!(
            "{fill}: {} of {} pixels matched, EPE on matched {epe:.3}, EPE overall {mean_all:.3}",
            flow.valid_count(),
            flow.len()
        );
    }
    let flow = densify(&rs, &rd, &asg, &src, FillMode::default())?;
    let warped = warp_backward(&dst, &flow, InvalidPixels::UseFlow)?;
    let err = src.data().iter().zip(warped.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / src.data().len() as f64;
    println!("mean |source - warped target| = {err:.4}");
    Ok(())
}
