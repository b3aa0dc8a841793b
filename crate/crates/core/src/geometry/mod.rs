//! Numeric primitives: boxes, the 3-D location/offset space, the geometric
//! median and thin-plate-spline warps.

mod bbox;
mod location;
mod median;
mod tps;

pub use bbox::{containment_ratio, iou, BBox};
pub use location::{GaussianKernel, LocationVector, Offset};
pub use median::{geometric_median, geometric_median_with, median_objective, WeiszfeldOptions};
pub use tps::{warp_box_tight, TpsMap};

/// A 2-D point in image coordinates.
pub type Point = [f64; 2];
