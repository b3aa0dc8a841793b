use rayon::prelude::*;

use super::{assign_rows, hough_histogram, AppearanceMatrix, Assignment, HoughConfig, Strategy};
use crate::error::{Error, Result};
use crate::geometry::{GaussianKernel, LocationVector, Offset};
use crate::proposals::ProposalSet;

/// Largest `n * n'` accepted by exact PHM, whose cost is quadratic in it.
pub const EXACT_PAIR_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhmMode {
    /// Sum over every pairwise offset.
    Exact,
    /// Sum over the bin centers of a Hough histogram.
    Binned(HoughConfig),
}

impl Default for PhmMode {
    fn default() -> Self {
        PhmMode::Binned(HoughConfig::default())
    }
}

fn pair_offsets(src: &ProposalSet, dst: &ProposalSet) -> Vec<Offset> {
    let ls: Vec<LocationVector> = src.iter().map(|p| LocationVector::of(&p.bbox)).collect();
    let ld: Vec<LocationVector> = dst.iter().map(|p| LocationVector::of(&p.bbox)).collect();
    ls.iter()
        .flat_map(|s| ld.iter().map(move |d| *s - *d))
        .collect()
}

/// Geometric term of every pair, row-major `n x n'`.
fn geometric_matrix(
    src: &ProposalSet,
    dst: &ProposalSet,
    a: &AppearanceMatrix,
    kernel: &GaussianKernel,
    mode: PhmMode,
) -> Result<Vec<f64>> {
    a.check_against(src, dst)?;
    let offsets = pair_offsets(src, dst);
    match mode {
        PhmMode::Exact => {
            if offsets.len() > EXACT_PAIR_LIMIT {
                return Err(Error::CostGuard {
                    pairs: offsets.len(),
                    limit: EXACT_PAIR_LIMIT,
                });
            }
            // h(x) for every x in the offset set, then g at every pair offset.
            let votes: Vec<f64> = offsets
                .par_iter()
                .map(|x| {
                    offsets
                        .iter()
                        .zip(a.data())
                        .map(|(o, w)| w * kernel.eval(&(*o - *x)))
                        .sum()
                })
                .collect();
            Ok(offsets
                .par_iter()
                .map(|o| {
                    offsets
                        .iter()
                        .zip(&votes)
                        .map(|(x, h)| kernel.eval(&(*o - *x)) * h)
                        .sum()
                })
                .collect())
        }
        PhmMode::Binned(cfg) => {
            let hist = hough_histogram(src, dst, a, kernel, &cfg)?;
            Ok(offsets.par_iter().map(|o| hist.consensus_at(o)).collect())
        }
    }
}

/// Posterior `A[i][j] * g_ij` for every pair, row-major `n x n'`.
pub fn phm_posteriors(
    src: &ProposalSet,
    dst: &ProposalSet,
    a: &AppearanceMatrix,
    kernel: &GaussianKernel,
    mode: PhmMode,
) -> Result<Vec<f64>> {
    let g = geometric_matrix(src, dst, a, kernel, mode)?;
    Ok(g.iter().zip(a.data()).map(|(g, a)| a * g).collect())
}

/// Probabilistic Hough matching: the geometric term of a pair is the
/// kernel-smoothed Hough score at the pair's own offset.
pub fn phm(
    src: &ProposalSet,
    dst: &ProposalSet,
    a: &AppearanceMatrix,
    kernel: &GaussianKernel,
    mode: PhmMode,
) -> Result<Assignment> {
    let g = geometric_matrix(src, dst, a, kernel, mode)?;
    let cols = a.cols();
    Ok(assign_rows(Strategy::Phm, a, |i, j| g[i * cols + j]))
}
