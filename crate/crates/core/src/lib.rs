//! Semantic correspondence from object proposals.
//!
//! Two images are described by sets of object proposals, each with a HOG (or
//! imported) appearance descriptor. Region matches combine appearance with a
//! geometric consistency term:
//!
//! - NAM ranks targets by appearance alone;
//! - PHM weights each candidate by a global Hough vote over location offsets;
//! - LOM compares each candidate's offset with a robust local offset, the
//!   geometric median of the offsets of overlapping neighbors.
//!
//! Region matches are turned into a dense flow field through per-pixel
//! anchor matches, and [`benchmark`] scores matching and flow against
//! keypoint-driven thin-plate-spline ground truth (PCR, mIoU@k, PCK).
//!
//! # Quick start
//! ```no_run
//! use proposal_flow::prelude::*;
//!
//! # fn run() -> proposal_flow::Result<()> {
//! let src = load_image("src.ppm")?;
//! let dst = load_image("dst.ppm")?;
//! let rs = sliding_window(src.width(), src.height(), 1000)?;
//! let rd = sliding_window(dst.width(), dst.height(), 1000)?;
//! let fs = describe_proposals(&src, &rs, DEFAULT_PATCH_SIDE)?;
//! let fd = describe_proposals(&dst, &rd, DEFAULT_PATCH_SIDE)?;
//! let white = whiten(&[&fs, &fd])?;
//! let a = appearance_matrix(&white[0], &white[1])?;
//! let kernel = GaussianKernel::for_image(src.width(), src.height());
//! let matches = lom(&rs, &rd, &a, &kernel)?;
//! let flow = densify(&rs, &rd, &matches, &src, FillMode::default())?;
//! write_flo(&flow, "flow.flo")?;
//! # Ok(())
//! # }
//! ```

pub mod benchmark;
pub mod error;
pub mod features;
pub mod flowfield;
pub mod geometry;
pub mod imageio;
pub mod matching;
pub mod pipeline;
pub mod proposals;
pub mod synthetic;

pub use error::{Error, Result};

/// The most common entry points.
pub mod prelude {
    pub use crate::benchmark::{
        ground_truth, miou_at_k, pck, pcr_curve, select_rs, tau_grid, upper_bound_curve,
        AnnotatedImage, GroundTruth, MetricCurve,
    };
    pub use crate::features::{
        appearance_prob, describe_proposals, extract_patch, hog_descriptor, whiten,
        DescriptorKind, DescriptorSet, DEFAULT_PATCH_SIDE,
    };
    pub use crate::flowfield::{anchor_map, densify, transfer_pixel, FillMode};
    pub use crate::geometry::{
        containment_ratio, geometric_median, iou, BBox, GaussianKernel, LocationVector, Offset,
        TpsMap,
    };
    pub use crate::imageio::{
        load_image, read_flo, save_image, warp_backward, write_flo, FlowField, Image,
        InvalidPixels,
    };
    pub use crate::matching::{
        appearance_matrix, lom, nam, phm, AppearanceMatrix, Assignment, HoughConfig, Matcher,
        PhmMode, Strategy,
    };
    pub use crate::proposals::{
        gaussian_sample, import_proposals, sliding_window, uniform_sample, ProposalSet,
    };
    pub use crate::{Error, Result};
}
