//! NAM, PHM and LOM on a synthetic pair with a known similarity transform,
//! scored by PCR and mIoU@k.

use proposal_flow::prelude::*;
use proposal_flow::synthetic::clutter_pair;

fn main() -> Result<()> {
    let pair = clutter_pair(96, 80, 1)?;
    let (src, dst) = (&pair.src, &pair.dst);
    let rs = sliding_window(src.image.width(), src.image.height(), 400)?;
    let rd = sliding_window(dst.image.width(), dst.image.height(), 400)?;
    let fs = describe_proposals(&src.image, &rs, DEFAULT_PATCH_SIDE)?;
    let fd = describe_proposals(&dst.image, &rd, DEFAULT_PATCH_SIDE)?;
    let white = whiten(&[&fs, &fd])?;
    let a = appearance_matrix(&white[0], &white[1])?;
    let kernel = GaussianKernel::for_image(src.image.width(), src.image.height());
    let gt = ground_truth(&rs, src, dst)?;
    let taus = tau_grid(101);
    println!("{} evaluated proposals, upper bound AuC {:.3}", gt.len(), upper_bound_curve(&rd, &gt, &taus)?.auc);

    for m in [
        Matcher::Nam,
        Matcher::Phm { kernel, mode: PhmMode::default() },
        Matcher::Lom { kernel },
    ] {
        let asg = m.run(&rs, &rd, &a)?;
        let pcr = pcr_curve(&asg, &rd, &gt, &taus)?;
        let miou = miou_at_k(&asg, &rd, &gt);
        println!("{}: PCR AuC {:.3}, mIoU@k AuC {:.3}", m.strategy(), pcr.auc, miou.auc);
    }
    Ok(())
}
