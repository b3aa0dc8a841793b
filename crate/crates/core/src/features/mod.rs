//! Region appearance descriptors and the appearance-matching probability.

mod descriptor;
mod hog;
mod patch;
mod whiten;

pub use descriptor::{
    appearance_prob, read_descriptors, write_descriptors, Descriptor, DescriptorKind,
    DescriptorSet,
};
pub(crate) use descriptor::similarity_unchecked;
pub use hog::{hog_descriptor, HOG_CELL, HOG_FEATURES_PER_CELL};
pub use patch::{extract_patch, DEFAULT_PATCH_SIDE};
pub use whiten::{whiten, Whitening};

use rayon::prelude::*;

use crate::error::Result;
use crate::imageio::Image;
use crate::proposals::ProposalSet;

/// HOG descriptor of every proposal, computed on the luma channel after
/// resampling each box to a `side x side` patch.
pub fn describe_proposals(img: &Image, proposals: &ProposalSet, side: usize) -> Result<DescriptorSet> {
    let luma = img.to_luma();
    let items: Vec<Descriptor> = proposals
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|p| hog_descriptor(&extract_patch(&luma, &p.bbox, side)))
        .collect();
    DescriptorSet::new(DescriptorKind::Hog, items)
}
