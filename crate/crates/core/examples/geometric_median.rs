//! Robust offset estimate: the geometric median ignores a gross outlier that
//! drags the mean away.

use proposal_flow::geometry::median_objective;
use proposal_flow::prelude::*;

fn main() {
    let mut offsets = vec![
        Offset::new(10.0, 4.0, 0.1),
        Offset::new(11.0, 5.0, 0.0),
        Offset::new(9.5, 4.5, -0.1),
        Offset::new(10.5, 3.5, 0.05),
    ];
    offsets.push(Offset::new(-80.0, 60.0, 2.0));

    let n = offsets.len() as f64;
    let mean = offsets.iter().fold(Offset::ZERO, |acc, o| acc + o.scale(1.0 / n));
    let median = geometric_median(&offsets);
    println!("mean   {mean:?}  objective {:.3}", median_objective(&mean, &offsets));
    println!("median {median:?}  objective {:.3}", median_objective(&median, &offsets));
}
