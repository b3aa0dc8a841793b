//! Fits an interpolating thin-plate spline on keypoint pairs and warps a box
//! to its tight ground-truth box.

use proposal_flow::geometry::warp_box_tight;
use proposal_flow::prelude::*;

fn main() -> Result<()> {
    let src = [[10.0, 10.0], [90.0, 12.0], [50.0, 80.0], [20.0, 60.0], [75.0, 55.0]];
    // a bend: points on the right move further than those on the left
    let dst: Vec<[f64; 2]> = src
        .iter()
        .map(|p| [p[0] * 1.1 + 5.0, p[1] + 0.002 * p[0] * p[0]])
        .collect();
    let tps = TpsMap::fit(&src, &dst, 0.0)?;
    for (s, d) in src.iter().zip(&dst) {
        let m = tps.apply(*s);
        println!("{s:?} -> ({:.3}, {:.3}), annotated {d:?}", m[0], m[1]);
    }
    let b = BBox::new(30.0, 20.0, 70.0, 50.0)?;
    println!("{b:?}\n  -> {:?}", warp_box_tight(&tps, &b)?);
    Ok(())
}
