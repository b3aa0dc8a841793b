//! Region matching: appearance similarity combined with one of three
//! geometric consistency terms (none, global Hough voting, local offsets).

mod assignment;
mod hough;
mod lom;
mod phm;

pub use assignment::{Assignment, RegionMatch, Strategy};
pub use hough::{hough_histogram, HoughConfig, HoughHistogram};
pub use lom::{local_offsets, lom, neighborhood, neighborhoods, LocalOffsetField};
pub use phm::{phm, phm_posteriors, PhmMode, EXACT_PAIR_LIMIT};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{similarity_unchecked, DescriptorSet};
use crate::geometry::GaussianKernel;
use crate::proposals::ProposalSet;

/// Dense `n x n'` table of appearance probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl AppearanceMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "appearance probability {v} outside [0, 1]"
            )));
        }
        Ok(AppearanceMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn check_against(&self, src: &ProposalSet, dst: &ProposalSet) -> Result<()> {
        if self.rows != src.len() || self.cols != dst.len() {
            return Err(Error::DimensionMismatch(format!(
                "appearance matrix is {}x{} but proposal sets have {} and {}",
                self.rows,
                self.cols,
                src.len(),
                dst.len()
            )));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument("empty proposal set".into()));
        }
        Ok(())
    }
}

/// `A[i][j] = p(f_i -> f'_j)` for every proposal pair.
pub fn appearance_matrix(src: &DescriptorSet, dst: &DescriptorSet) -> Result<AppearanceMatrix> {
    if src.kind() != dst.kind() || (src.dim() != dst.dim() && !src.is_empty() && !dst.is_empty())
    {
        return Err(Error::DescriptorMismatch(format!(
            "{} [{}] vs {} [{}]",
            src.kind(),
            src.dim(),
            dst.kind(),
            dst.dim()
        )));
    }
    let cols = dst.len();
    let data: Vec<f64> = (0..src.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let f = src.get(i);
            dst.items().iter().map(move |g| similarity_unchecked(f, g))
        })
        .collect();
    AppearanceMatrix::new(src.len(), cols, data)
}

/// Naive appearance matching: geometric term fixed to 1.
pub fn nam(src: &ProposalSet, dst: &ProposalSet, a: &AppearanceMatrix) -> Result<Assignment> {
    a.check_against(src, dst)?;
    Ok(nam_unchecked(a))
}

pub(crate) fn nam_unchecked(a: &AppearanceMatrix) -> Assignment {
    assign_rows(Strategy::Nam, a, |_, _| 1.0)
}

/// Row-wise argmax of `A[i][j] * geometric(i, j)`, ties to the lowest `j`.
pub(crate) fn assign_rows(
    strategy: Strategy,
    a: &AppearanceMatrix,
    geometric: impl Fn(usize, usize) -> f64 + Sync,
) -> Assignment {
    let matches = (0..a.rows())
        .into_par_iter()
        .map(|i| {
            let mut best = RegionMatch {
                src: i,
                tgt: 0,
                posterior: f64::NEG_INFINITY,
                appearance: 0.0,
                geometric: 0.0,
            };
            for j in 0..a.cols() {
                let app = a.get(i, j);
                let geo = geometric(i, j);
                let post = app * geo;
                if post > best.posterior {
                    best = RegionMatch {
                        src: i,
                        tgt: j,
                        posterior: post,
                        appearance: app,
                        geometric: geo,
                    };
                }
            }
            best
        })
        .collect();
    Assignment::new(strategy, matches)
}

/// Which geometric term to use, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Matcher {
    Nam,
    Phm { kernel: GaussianKernel, mode: PhmMode },
    Lom { kernel: GaussianKernel },
}

impl Matcher {
    pub fn strategy(&self) -> Strategy {
        match self {
            Matcher::Nam => Strategy::Nam,
            Matcher::Phm { .. } => Strategy::Phm,
            Matcher::Lom { .. } => Strategy::Lom,
        }
    }

    pub fn run(
        &self,
        src: &ProposalSet,
        dst: &ProposalSet,
        a: &AppearanceMatrix,
    ) -> Result<Assignment> {
        match *self {
            Matcher::Nam => nam(src, dst, a),
            Matcher::Phm { kernel, mode } => phm(src, dst, a, &kernel, mode),
            Matcher::Lom { kernel } => lom(src, dst, a, &kernel),
        }
    }
}
