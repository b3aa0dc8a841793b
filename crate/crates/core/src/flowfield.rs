//! Dense flow from region matches: per-pixel anchor matches, box-to-box
//! transfer, collision removal and guided hole filling.

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};
use crate::imageio::{nearest_valid, FlowField, Image};
use crate::matching::Assignment;
use crate::proposals::ProposalSet;

/// Per-pixel id of the covering proposal with the highest posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorIndex {
    pub width: usize,
    pub height: usize,
    pub anchors: Vec<Option<usize>>,
}

impl AnchorIndex {
    pub fn get(&self, x: usize, y: usize) -> Option<usize> {
        self.anchors[y * self.width + x]
    }
}

/// Anchor of every pixel `(x, y)`: among proposals whose closed box contains
/// the pixel, the one with the highest posterior (ties to the lowest id).
pub fn anchor_map(src: &ProposalSet, asg: &Assignment, width: usize, height: usize) -> AnchorIndex {
    let mut anchors: Vec<Option<usize>> = vec![None; width * height];
    let mut best = vec![f64::NEG_INFINITY; width * height];
    for p in src {
        let post = asg.posterior(p.id);
        let b = p.bbox;
        let x0 = b.x_min.ceil().max(0.0) as usize;
        let y0 = b.y_min.ceil().max(0.0) as usize;
        let x1 = b.x_max.floor().min(width as f64 - 1.0);
        let y1 = b.y_max.floor().min(height as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let i = y * width + x;
                if post > best[i] {
                    best[i] = post;
                    anchors[i] = Some(p.id);
                }
            }
        }
    }
    AnchorIndex {
        width,
        height,
        anchors,
    }
}

/// Maps `p` from `src_box` to `dst_box` by the per-axis affine map taking one
/// box onto the other.
pub fn transfer_pixel(p: Point, src_box: &BBox, dst_box: &BBox) -> Point {
    [
        dst_box.x_min + (p[0] - src_box.x_min) * dst_box.width() / src_box.width(),
        dst_box.y_min + (p[1] - src_box.y_min) * dst_box.height() / src_box.height(),
    ]
}

/// Parameters of the guided hole filler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointBilateral {
    pub radius: usize,
    pub sigma_spatial: f64,
    pub sigma_range: f64,
}

impl Default for JointBilateral {
    fn default() -> Self {
        JointBilateral {
            radius: 15,
            sigma_spatial: 7.0,
            sigma_range: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FillMode {
    None,
    Nearest,
    JointBilateral(JointBilateral),
}

impl Default for FillMode {
    fn default() -> Self {
        FillMode::JointBilateral(JointBilateral::default())
    }
}

impl FromStr for FillMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FillMode::None),
            "nearest" => Ok(FillMode::Nearest),
            "joint_bilateral" | "joint-bilateral" => Ok(FillMode::default()),
            other => Err(Error::InvalidArgument(format!("unknown fill mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for FillMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FillMode::None => "none",
            FillMode::Nearest => "nearest",
            FillMode::JointBilateral(_) => "joint_bilateral",
        })
    }
}

/// Dense flow over the source image `guide`.
///
/// Each anchored pixel is transferred through its anchor match and takes the
/// anchor's posterior as score. Pixels whose rounded targets coincide keep
/// only the best-scoring claimant (ties to the first in row-major order).
/// Remaining holes are filled per `fill`; the validity mask keeps the
/// pre-fill state and filled pixels keep score 0.
pub fn densify(
    src: &ProposalSet,
    dst: &ProposalSet,
    asg: &Assignment,
    guide: &Image,
    fill: FillMode,
) -> Result<FlowField> {
    Ok(densify_with_anchors(src, dst, asg, guide, fill)?.0)
}

/// [`densify`], also returning the anchor map used.
pub fn densify_with_anchors(
    src: &ProposalSet,
    dst: &ProposalSet,
    asg: &Assignment,
    guide: &Image,
    fill: FillMode,
) -> Result<(FlowField, AnchorIndex)> {
    let (w, h) = guide.dims();
    if (src.width, src.height) != (w, h) {
        return Err(Error::DimensionMismatch(format!(
            "proposals are for a {}x{} image, guide is {w}x{h}",
            src.width, src.height
        )));
    }
    if asg.len() != src.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} matches for {} proposals",
            asg.len(),
            src.len()
        )));
    }
    if let Some(m) = asg.matches().iter().find(|m| m.tgt >= dst.len()) {
        return Err(Error::DimensionMismatch(format!(
            "match target {} outside {} target proposals",
            m.tgt,
            dst.len()
        )));
    }

    let anchors = anchor_map(src, asg, w, h);
    let mut flow = FlowField::new(w, h);
    let mut claims: HashMap<(i64, i64), usize> = HashMap::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let Some(r) = anchors.anchors[i] else {
                continue;
            };
            let p = [x as f64, y as f64];
            let q = transfer_pixel(p, &src.get(r).bbox, &dst.get(asg.target(r)).bbox);
            let score = asg.posterior(r);
            flow.u[i] = (q[0] - p[0]) as f32;
            flow.v[i] = (q[1] - p[1]) as f32;
            flow.score[i] = score;
            flow.valid[i] = true;

            let key = (q[0].round() as i64, q[1].round() as i64);
            match claims.get(&key) {
                Some(&holder) if flow.score[holder] >= score => invalidate(&mut flow, i),
                Some(&holder) => {
                    invalidate(&mut flow, holder);
                    claims.insert(key, i);
                }
                None => {
                    claims.insert(key, i);
                }
            }
        }
    }

    match fill {
        FillMode::None => {}
        FillMode::Nearest => fill_nearest(&mut flow),
        FillMode::JointBilateral(params) => fill_joint_bilateral(&mut flow, guide, params),
    }
    Ok((flow, anchors))
}

fn invalidate(flow: &mut FlowField, i: usize) {
    flow.u[i] = 0.0;
    flow.v[i] = 0.0;
    flow.score[i] = 0.0;
    flow.valid[i] = false;
}

fn fill_nearest(flow: &mut FlowField) {
    if let Some(source) = nearest_valid(flow) {
        for (i, s) in source.into_iter().enumerate() {
            if !flow.valid[i] {
                flow.u[i] = flow.u[s];
                flow.v[i] = flow.v[s];
            }
        }
    }
}

/// Fills every invalid pixel with a weighted mean of valid flow vectors,
/// weights combining spatial distance and guide-intensity difference. Holes
/// with no valid pixel in reach wait for the next pass, whose radius (and
/// spatial sigma) doubles.
fn fill_joint_bilateral(flow: &mut FlowField, guide: &Image, params: JointBilateral) {
    if flow.valid_count() == 0 {
        return;
    }
    let (w, h) = (flow.width, flow.height);
    let luma = guide.to_luma();
    let intensity = luma.data();
    let mut pending: Vec<usize> = (0..w * h).filter(|&i| !flow.valid[i]).collect();
    let mut radius = params.radius.max(1);
    let mut sigma_s = params.sigma_spatial;
    let range_den = 2.0 * params.sigma_range * params.sigma_range;

    while !pending.is_empty() {
        let spatial_den = 2.0 * sigma_s * sigma_s;
        let snapshot = &*flow;
        let filled: Vec<Option<(f32, f32)>> = pending
            .par_iter()
            .map(|&i| {
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                let r = radius as isize;
                let (mut su, mut sv, mut sw) = (0.0, 0.0, 0.0);
                for qy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                    for qx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                        let j = qy as usize * w + qx as usize;
                        if !snapshot.valid[j] {
                            continue;
                        }
                        let d2 = ((qx - x) * (qx - x) + (qy - y) * (qy - y)) as f64;
                        let di = intensity[i] - intensity[j];
                        let wt = (-d2 / spatial_den - di * di / range_den).exp();
                        su += wt * snapshot.u[j] as f64;
                        sv += wt * snapshot.v[j] as f64;
                        sw += wt;
                    }
                }
                (sw > 0.0).then(|| ((su / sw) as f32, (sv / sw) as f32))
            })
            .collect();
        let mut still = Vec::new();
        for (&i, f) in pending.iter().zip(filled) {
            match f {
                Some((u, v)) => {
                    flow.u[i] = u;
                    flow.v[i] = v;
                }
                None => still.push(i),
            }
        }
        pending = still;
        radius *= 2;
        sigma_s *= 2.0;
    }
}
