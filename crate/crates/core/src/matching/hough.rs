use rayon::prelude::*;

use super::AppearanceMatrix;
use crate::error::{Error, Result};
use crate::geometry::{GaussianKernel, LocationVector, Offset};
use crate::proposals::ProposalSet;

/// Source rows accumulated per partial histogram. Fixed so the merge order,
/// and therefore the floating-point result, does not depend on thread count.
const CHUNK_ROWS: usize = 16;

/// Binning of the offset space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughConfig {
    /// Bin counts along (dx, dy, dsc); each at least 3.
    pub bins: [usize; 3],
    /// Kernel truncation radius in units of sigma (Mahalanobis). `None`
    /// covers the whole grid.
    pub truncation: Option<f64>,
}

impl Default for HoughConfig {
    fn default() -> Self {
        HoughConfig {
            bins: [16, 16, 8],
            truncation: Some(2.0),
        }
    }
}

impl HoughConfig {
    pub fn full_coverage(bins: [usize; 3]) -> Self {
        HoughConfig {
            bins,
            truncation: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.bins.iter().any(|&b| b < 3) {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 bins per axis, got {:?}",
                self.bins
            )));
        }
        if let Some(r) = self.truncation {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::InvalidArgument(format!("truncation radius {r} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Generalized Hough transform over the 3-D offset space.
///
/// `values` holds the appearance-weighted votes `h`, smoothed by the
/// kernel; `occupancy` holds the binned offset set itself, each pairwise
/// offset shared trilinearly among its surrounding bin centers.
#[derive(Debug, Clone, PartialEq)]
pub struct HoughHistogram {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub bins: [usize; 3],
    pub width: [f64; 3],
    pub values: Vec<f64>,
    pub occupancy: Vec<f64>,
    sigmas: [f64; 3],
    truncation: Option<f64>,
}

impl HoughHistogram {
    /// Empty grid spanning every pairwise offset between the two location
    /// sets, padded by one bin on each side.
    fn grid(
        src: &[LocationVector],
        dst: &[LocationVector],
        kernel: &GaussianKernel,
        cfg: &HoughConfig,
    ) -> Self {
        let extent = |f: fn(&LocationVector) -> f64| {
            let lo = |v: &[LocationVector]| v.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = |v: &[LocationVector]| v.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            (lo(src) - hi(dst), hi(src) - lo(dst))
        };
        let ranges = [extent(|l| l.cx), extent(|l| l.cy), extent(|l| l.sc)];
        let sigmas = kernel.sigmas();
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        let mut width = [0.0; 3];
        for k in 0..3 {
            let (lo, hi) = ranges[k];
            let span = hi - lo;
            width[k] = if span > 0.0 {
                span / (cfg.bins[k] - 2) as f64
            } else {
                sigmas[k]
            };
            // a degenerate axis puts its single value on the middle bin center
            let pad = if span > 0.0 {
                width[k]
            } else {
                ((cfg.bins[k] / 2) as f64 + 0.5) * width[k]
            };
            min[k] = lo - pad;
            max[k] = min[k] + width[k] * cfg.bins[k] as f64;
        }
        let n = cfg.bins.iter().product();
        HoughHistogram {
            min,
            max,
            bins: cfg.bins,
            width,
            values: vec![0.0; n],
            occupancy: vec![0.0; n],
            sigmas,
            truncation: cfg.truncation,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, b: [usize; 3]) -> usize {
        (b[0] * self.bins[1] + b[1]) * self.bins[2] + b[2]
    }

    pub fn center(&self, b: [usize; 3]) -> Offset {
        Offset::from_array(std::array::from_fn(|k| {
            self.min[k] + (b[k] as f64 + 0.5) * self.width[k]
        }))
    }

    /// Bin containing `o`, clamped to the grid.
    pub fn bin_of(&self, o: &Offset) -> [usize; 3] {
        let a = o.to_array();
        std::array::from_fn(|k| {
            let i = ((a[k] - self.min[k]) / self.width[k]).floor();
            i.clamp(0.0, (self.bins[k] - 1) as f64) as usize
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Bin with the most votes (first in index order on ties).
    pub fn peak(&self) -> [usize; 3] {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        let s = best % self.bins[2];
        let y = (best / self.bins[2]) % self.bins[1];
        let x = best / (self.bins[1] * self.bins[2]);
        [x, y, s]
    }

    /// Per-axis bin range within the truncation radius of `coord`, with the
    /// squared normalized distance of each bin center.
    fn axis_window(&self, k: usize, coord: f64) -> (usize, Vec<f64>) {
        let (lo, hi) = match self.truncation {
            Some(r) => {
                let reach = r * self.sigmas[k];
                let lo = ((coord - reach - self.min[k]) / self.width[k] - 0.5).ceil();
                let hi = ((coord + reach - self.min[k]) / self.width[k] - 0.5).floor();
                let top = (self.bins[k] - 1) as f64;
                if hi < 0.0 || lo > top {
                    return (0, Vec::new());
                }
                (lo.max(0.0) as usize, hi.min(top) as usize)
            }
            None => (0, self.bins[k] - 1),
        };
        let d2 = (lo..=hi)
            .map(|i| {
                let c = self.min[k] + (i as f64 + 0.5) * self.width[k];
                let z = (c - coord) / self.sigmas[k];
                z * z
            })
            .collect();
        (lo, d2)
    }

    /// Visits every bin inside the truncated kernel around `o` with its
    /// kernel value `K(c_b - o)`.
    fn for_each_in_kernel(&self, o: &Offset, mut f: impl FnMut(usize, f64)) {
        let a = o.to_array();
        let (x0, ex) = self.axis_window(0, a[0]);
        let (y0, ey) = self.axis_window(1, a[1]);
        let (s0, es) = self.axis_window(2, a[2]);
        let r2 = self.truncation.map_or(f64::INFINITY, |r| r * r);
        for (ix, dx) in ex.iter().enumerate() {
            for (iy, dy) in ey.iter().enumerate() {
                let dxy = dx + dy;
                if dxy > r2 {
                    continue;
                }
                let base = ((x0 + ix) * self.bins[1] + y0 + iy) * self.bins[2] + s0;
                for (is, ds) in es.iter().enumerate() {
                    let m2 = dxy + ds;
                    if m2 <= r2 {
                        f(base + is, (-0.5 * m2).exp());
                    }
                }
            }
        }
    }

    /// Adds one vote of the given mass, spread by the normalized truncated
    /// kernel (a vote that reaches no bin center lands in its own bin), and
    /// counts the offset itself in the occupancy grid.
    fn splat(&mut self, o: &Offset, mass: f64, scratch: &mut Vec<(usize, f64)>) {
        scratch.clear();
        let mut z = 0.0;
        self.for_each_in_kernel(o, |b, w| {
            scratch.push((b, w));
            z += w;
        });
        if z > 0.0 {
            for &(b, w) in scratch.iter() {
                self.values[b] += mass * w / z;
            }
        } else {
            let b = self.index(self.bin_of(o));
            self.values[b] += mass;
        }
        self.count_trilinear(o);
    }

    /// Shares one unit of occupancy among the 8 bin centers around `o`.
    fn count_trilinear(&mut self, o: &Offset) {
        let a = o.to_array();
        let mut lo = [0usize; 3];
        let mut fr = [0.0; 3];
        for k in 0..3 {
            let t = ((a[k] - self.min[k]) / self.width[k] - 0.5).clamp(0.0, (self.bins[k] - 1) as f64);
            let i = (t.floor() as usize).min(self.bins[k].saturating_sub(2));
            lo[k] = i;
            fr[k] = t - i as f64;
        }
        for c in 0..8 {
            let mut w = 1.0;
            let mut b = [0usize; 3];
            for k in 0..3 {
                let up = (c >> k) & 1 == 1;
                b[k] = lo[k] + up as usize;
                w *= if up { fr[k] } else { 1.0 - fr[k] };
            }
            if w > 0.0 {
                let i = self.index(b);
                self.occupancy[i] += w;
            }
        }
    }

    /// Geometric term of binned PHM at offset `o`:
    /// `sum_b occupancy_b * K(o - c_b) * h_b`.
    pub fn consensus_at(&self, o: &Offset) -> f64 {
        let mut g = 0.0;
        self.for_each_in_kernel(o, |b, w| g += w * self.values[b] * self.occupancy[b]);
        g
    }
}

/// Votes every proposal pair's offset `gamma(s) - gamma(s')` into the grid,
/// weighted by its appearance probability.
pub fn hough_histogram(
    src: &ProposalSet,
    dst: &ProposalSet,
    a: &AppearanceMatrix,
    kernel: &GaussianKernel,
    cfg: &HoughConfig,
) -> Result<HoughHistogram> {
    a.check_against(src, dst)?;
    cfg.validate()?;
    let ls: Vec<LocationVector> = src.iter().map(|p| LocationVector::of(&p.bbox)).collect();
    let ld: Vec<LocationVector> = dst.iter().map(|p| LocationVector::of(&p.bbox)).collect();
    let empty = HoughHistogram::grid(&ls, &ld, kernel, cfg);

    let partials: Vec<HoughHistogram> = (0..ls.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK_ROWS)
        .map(|rows| {
            let mut h = empty.clone();
            let mut scratch = Vec::new();
            for &i in rows {
                for (j, l) in ld.iter().enumerate() {
                    h.splat(&(ls[i] - *l), a.get(i, j), &mut scratch);
                }
            }
            h
        })
        .collect();

    let mut out = empty;
    for p in partials {
        for (o, v) in out.values.iter_mut().zip(&p.values) {
            *o += v;
        }
        for (o, v) in out.occupancy.iter_mut().zip(&p.occupancy) {
            *o += v;
        }
    }
    Ok(out)
}
