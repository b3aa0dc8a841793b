use rayon::prelude::*;

use super::{assign_rows, nam_unchecked, AppearanceMatrix, Assignment, Strategy};
use crate::error::Result;
use crate::geometry::{geometric_median, GaussianKernel, LocationVector, Offset};
use crate::proposals::ProposalSet;

/// Ids of proposals whose box shares positive area with proposal `i`
/// (including `i` itself), ascending.
pub fn neighborhood(set: &ProposalSet, i: usize) -> Vec<usize> {
    let b = set.get(i).bbox;
    set.iter()
        .filter(|p| p.bbox.overlaps(&b))
        .map(|p| p.id)
        .collect()
}

/// [`neighborhood`] of every proposal.
pub fn neighborhoods(set: &ProposalSet) -> Vec<Vec<usize>> {
    (0..set.len())
        .into_par_iter()
        .map(|i| neighborhood(set, i))
        .collect()
}

/// Robust per-region offset estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOffsetField {
    pub offsets: Vec<Offset>,
    pub neighbor_counts: Vec<usize>,
}

struct LocalModel {
    field: LocalOffsetField,
    /// Sum of the neighbors' best appearance probabilities.
    support: Vec<f64>,
}

fn local_model(src: &ProposalSet, dst: &ProposalSet, a: &AppearanceMatrix) -> LocalModel {
    let initial = nam_unchecked(a);
    let own: Vec<Offset> = initial
        .matches()
        .iter()
        .map(|m| LocationVector::of(&src.get(m.src).bbox) - LocationVector::of(&dst.get(m.tgt).bbox))
        .collect();
    let rows: Vec<(Offset, usize, f64)> = (0..src.len())
        .into_par_iter()
        .map(|i| {
            let nbrs = neighborhood(src, i);
            let pts: Vec<Offset> = nbrs.iter().map(|&k| own[k]).collect();
            let support = nbrs.iter().map(|&k| initial.matches()[k].appearance).sum();
            (geometric_median(&pts), nbrs.len(), support)
        })
        .collect();
    let mut field = LocalOffsetField {
        offsets: Vec::with_capacity(rows.len()),
        neighbor_counts: Vec::with_capacity(rows.len()),
    };
    let mut support = Vec::with_capacity(rows.len());
    for (o, n, s) in rows {
        field.offsets.push(o);
        field.neighbor_counts.push(n);
        support.push(s);
    }
    LocalModel { field, support }
}

/// Geometric median of the offsets `gamma(s_k) - gamma(phi(s_k))` over each
/// region's neighbors, where `phi` is the appearance-only best match.
pub fn local_offsets(
    src: &ProposalSet,
    dst: &ProposalSet,
    a: &AppearanceMatrix,
) -> Result<LocalOffsetField> {
    a.check_against(src, dst)?;
    Ok(local_model(src, dst, a).field)
}

/// Local offset matching. The geometric term of pair `(i, j)` is the kernel
/// between its offset and the local offset of `i`, times the summed
/// appearance of `i`'s neighbors' initial matches.
pub fn lom(
    src: &ProposalSet,
    dst: &ProposalSet,
    a: &AppearanceMatrix,
    kernel: &GaussianKernel,
) -> Result<Assignment> {
    a.check_against(src, dst)?;
    let model = local_model(src, dst, a);
    let ls: Vec<LocationVector> = src.iter().map(|p| LocationVector::of(&p.bbox)).collect();
    let ld: Vec<LocationVector> = dst.iter().map(|p| LocationVector::of(&p.bbox)).collect();
    Ok(assign_rows(Strategy::Lom, a, |i, j| {
        let d = (ls[i] - ld[j]) - model.field.offsets[i];
        kernel.eval(&d) * model.support[i]
    }))
}
