//! Keypoint-driven ground truth and evaluation metrics: PCR, mIoU@k, PCK,
//! the proposal upper bound, and the file formats of the benchmark harness.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{containment_ratio, iou, warp_box_tight, BBox, Point, TpsMap};
use crate::imageio::{FlowField, Image};
use crate::matching::Assignment;
use crate::proposals::ProposalSet;

/// Minimum `|b ∩ r| / |r|` for a proposal to be evaluated.
pub const CONTAINMENT_THRESHOLD: f64 = 0.75;
/// Default PCK threshold factor.
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Keypoint {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct AnnotatedImage {
    pub image: Image,
    /// Object bounding box.
    pub bbox: BBox,
    pub keypoints: Vec<Keypoint>,
}

impl AnnotatedImage {
    /// Requires at least 3 keypoints, all inside the image, with unique ids.
    pub fn new(image: Image, bbox: BBox, keypoints: Vec<Keypoint>) -> Result<Self> {
        bbox.validate()?;
        if keypoints.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 keypoints, got {}",
                keypoints.len()
            )));
        }
        let (w, h) = (image.width() as f64, image.height() as f64);
        let mut seen = HashSet::new();
        for k in &keypoints {
            if !seen.insert(k.id) {
                return Err(Error::InvalidArgument(format!("duplicate keypoint id {}", k.id)));
            }
            if !(k.x >= 0.0 && k.y >= 0.0 && k.x <= w && k.y <= h) {
                return Err(Error::InvalidArgument(format!(
                    "keypoint {} at ({}, {}) is outside the {w}x{h} image",
                    k.id, k.x, k.y
                )));
            }
        }
        Ok(AnnotatedImage {
            image,
            bbox,
            keypoints,
        })
    }
}

/// Positions of the keypoint ids present in both lists, ordered by id.
pub fn common_keypoints(src: &[Keypoint], dst: &[Keypoint]) -> (Vec<Point>, Vec<Point>) {
    let d: BTreeMap<u32, Point> = dst.iter().map(|k| (k.id, [k.x, k.y])).collect();
    let s: BTreeMap<u32, Point> = src.iter().map(|k| (k.id, [k.x, k.y])).collect();
    s.iter()
        .filter_map(|(id, p)| d.get(id).map(|q| (*p, *q)))
        .unzip()
}

/// Evaluated source proposals with their warped ground-truth boxes.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Ids of the proposals in the evaluation set, ascending.
    pub members: Vec<usize>,
    /// Ground-truth target box of each member, aligned with `members`.
    pub boxes: Vec<BBox>,
    pub tps: TpsMap,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Ids of proposals lying at least 75% inside `b`.
pub fn select_rs(set: &ProposalSet, b: &BBox) -> Result<Vec<usize>> {
    let ids: Vec<usize> = set
        .iter()
        .filter(|p| containment_ratio(b, &p.bbox) >= CONTAINMENT_THRESHOLD)
        .map(|p| p.id)
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyRs);
    }
    Ok(ids)
}

/// Fits an interpolating TPS on the shared keypoints and maps every selected
/// source proposal to the tight box around its warped corners.
pub fn ground_truth(set: &ProposalSet, src: &AnnotatedImage, dst: &AnnotatedImage) -> Result<GroundTruth> {
    let (sp, dp) = common_keypoints(&src.keypoints, &dst.keypoints);
    if sp.len() < 3 {
        return Err(Error::TpsFit(format!("only {} shared keypoint ids", sp.len())));
    }
    let tps = TpsMap::fit(&sp, &dp, 0.0)?;
    let members = select_rs(set, &src.bbox)?;
    let boxes = members
        .iter()
        .map(|&i| warp_box_tight(&tps, &set.get(i).bbox))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruth {
        members,
        boxes,
        tps,
    })
}

/// Dense displacement field of the ground-truth TPS, all pixels valid.
pub fn ground_truth_flow(tps: &TpsMap, width: usize, height: usize) -> FlowField {
    let mut flow = FlowField::constant(width, height, 0.0, 0.0);
    for y in 0..height {
        for x in 0..width {
            let p = [x as f64, y as f64];
            let q = tps.apply(p);
            let i = flow.index(x, y);
            flow.u[i] = (q[0] - p[0]) as f32;
            flow.v[i] = (q[1] - p[1]) as f32;
        }
    }
    flow
}

/// Sampled metric curve with its normalized area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCurve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Trapezoidal integral divided by the abscissa span; a single sample is
    /// its own area.
    pub auc: f64,
}

impl MetricCurve {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        let auc = match x.len() {
            0 => 0.0,
            1 => y[0],
            n => {
                let span = x[n - 1] - x[0];
                let area: f64 = (1..n)
                    .map(|i| 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]))
                    .sum();
                if span > 0.0 {
                    area / span
                } else {
                    y.iter().sum::<f64>() / n as f64
                }
            }
        };
        MetricCurve { x, y, auc }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Writes two columns, `x_name,value`.
    pub fn write_csv(&self, x_name: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: csv::Error| Error::io(path, e);
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record([x_name, "value"]).map_err(io)?;
        for (x, y) in self.x.iter().zip(&self.y) {
            w.write_record([x.to_string(), y.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `n` uniform samples of `[0, 1]` (101 by default in the harness).
pub fn tau_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.iter().any(|t| !(0.0..=1.0).contains(t)) || taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("tau grid must be ascending in [0, 1]".into()));
    }
    Ok(())
}

fn step_curve(errors: &[f64], taus: &[f64]) -> MetricCurve {
    let n = errors.len().max(1) as f64;
    let y = taus
        .iter()
        .map(|&t| errors.iter().filter(|&&e| e < t).count() as f64 / n)
        .collect();
    MetricCurve::new(taus.to_vec(), y)
}

fn matched_ious(asg: &Assignment, dst: &ProposalSet, gt: &GroundTruth) -> Vec<f64> {
    gt.members
        .iter()
        .zip(&gt.boxes)
        .map(|(&m, star)| iou(&dst.get(asg.target(m)).bbox, star))
        .collect()
}

/// Fraction of evaluated proposals with `1 - IoU(matched box, truth) < τ`.
pub fn pcr_curve(asg: &Assignment, dst: &ProposalSet, gt: &GroundTruth, taus: &[f64]) -> Result<MetricCurve> {
    check_taus(taus)?;
    let errors: Vec<f64> = matched_ious(asg, dst, gt).iter().map(|v| 1.0 - v).collect();
    Ok(step_curve(&errors, taus))
}

/// PCR curve of the best IoU any target proposal reaches per member.
pub fn upper_bound_curve(dst: &ProposalSet, gt: &GroundTruth, taus: &[f64]) -> Result<MetricCurve> {
    check_taus(taus)?;
    let errors: Vec<f64> = gt
        .boxes
        .iter()
        .map(|star| {
            1.0 - dst
                .iter()
                .map(|p| iou(&p.bbox, star))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(step_curve(&errors, taus))
}

/// Mean IoU of the k best matches by posterior, for `k = 1..=|members|`.
pub fn miou_at_k(asg: &Assignment, dst: &ProposalSet, gt: &GroundTruth) -> MetricCurve {
    let ious = matched_ious(asg, dst, gt);
    let mut order: Vec<usize> = (0..gt.members.len()).collect();
    // members are ascending, so a stable sort breaks ties by lowest id
    order.sort_by(|&a, &b| {
        asg.posterior(gt.members[b])
            .total_cmp(&asg.posterior(gt.members[a]))
    });
    let mut sum = 0.0;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, &i) in order.iter().enumerate() {
        sum += ious[i];
        x.push((k + 1) as f64);
        y.push(sum / (k + 1) as f64);
    }
    MetricCurve::new(x, y)
}

/// Fraction of keypoints transferred by `flow` to within
/// `alpha * max(w, h)` of their targets, `(w, h)` the target object box.
/// Keypoints outside the flow grid count as misses.
pub fn pck(flow: &FlowField, src_kps: &[Point], dst_kps: &[Point], dst_box: &BBox, alpha: f64) -> Result<f64> {
    if src_kps.len() != dst_kps.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source vs {} target keypoints",
            src_kps.len(),
            dst_kps.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    if src_kps.is_empty() {
        return Err(Error::InvalidArgument("no keypoints".into()));
    }
    let threshold = alpha * dst_box.width().max(dst_box.height());
    let hits = src_kps
        .iter()
        .zip(dst_kps)
        .filter(|(k, t)| {
            flow.sample(k[0], k[1]).is_some_and(|f| {
                let dx = k[0] + f[0] - t[0];
                let dy = k[1] + f[1] - t[1];
                (dx * dx + dy * dy).sqrt() <= threshold
            })
        })
        .count();
    Ok(hits as f64 / src_kps.len() as f64)
}

/// [`pck`] over the keypoint ids shared by two annotated images.
pub fn pck_annotated(flow: &FlowField, src: &AnnotatedImage, dst: &AnnotatedImage, alpha: f64) -> Result<f64> {
    let (s, d) = common_keypoints(&src.keypoints, &dst.keypoints);
    pck(flow, &s, &d, &dst.bbox, alpha)
}

pub fn read_keypoints(path: impl AsRef<Path>) -> Result<Vec<Keypoint>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::io(path, e))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && record.get(0) == Some("id") {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::parse(path, line, "expected id,x,y"));
        }
        let id = record[0]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad id '{}'", &record[0])))?;
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad number '{}'", &record[k])))
        };
        out.push(Keypoint {
            id,
            x: num(1)?,
            y: num(2)?,
        });
    }
    Ok(out)
}

pub fn write_keypoints(kps: &[Keypoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["id", "x", "y"]).map_err(io)?;
    for k in kps {
        w.write_record([k.id.to_string(), k.x.to_string(), k.y.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a single line `x_min,y_min,x_max,y_max`.
pub fn read_bbox(path: impl AsRef<Path>) -> Result<BBox> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(path, 1, "empty box file"))?;
    let v: Vec<f64> = line
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if v.len() != 4 {
        return Err(Error::parse(path, 1, "expected x_min,y_min,x_max,y_max"));
    }
    BBox::new(v[0], v[1], v[2], v[3])
}

pub fn write_bbox(b: &BBox, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let line = format!("{},{},{},{}\n", b.x_min, b.y_min, b.x_max, b.y_max);
    std::fs::write(path, line).map_err(|e| Error::io(path, e))
}

/// Loads an image with its box and keypoint files.
pub fn load_annotated(image: impl AsRef<Path>, bbox: impl AsRef<Path>, keypoints: impl AsRef<Path>) -> Result<AnnotatedImage> {
    AnnotatedImage::new(
        crate::imageio::load_image(image)?,
        read_bbox(bbox)?,
        read_keypoints(keypoints)?,
    )
}

/// One row of a dataset manifest; relative paths are resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEntry {
    pub pair_id: String,
    pub src_image: PathBuf,
    pub dst_image: PathBuf,
    pub src_kp: PathBuf,
    pub dst_kp: PathBuf,
    pub src_bb: PathBuf,
    pub dst_bb: PathBuf,
}

impl PairEntry {
    pub fn load(&self) -> Result<(AnnotatedImage, AnnotatedImage)> {
        Ok((
            load_annotated(&self.src_image, &self.src_bb, &self.src_kp)?,
            load_annotated(&self.dst_image, &self.dst_bb, &self.dst_kp)?,
        ))
    }
}

pub const MANIFEST_HEADER: [&str; 7] = [
    "pair_id", "src_image", "dst_image", "src_kp", "dst_kp", "src_bb", "dst_bb",
];

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PairEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e))?;
    let headers = reader.headers().map_err(|e| Error::io(path, e))?.clone();
    if headers.iter().ne(MANIFEST_HEADER) {
        return Err(Error::parse(path, 1, format!("expected header {}", MANIFEST_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::io(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 7 {
            return Err(Error::parse(path, line, "expected 7 fields"));
        }
        let p = |k: usize| base.join(&record[k]);
        out.push(PairEntry {
            pair_id: record[0].to_string(),
            src_image: p(1),
            dst_image: p(2),
            src_kp: p(3),
            dst_kp: p(4),
            src_bb: p(5),
            dst_bb: p(6),
        });
    }
    Ok(out)
}

/// Scores of one image pair under one strategy. Fields a stage did not
/// compute are `None` and written as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMetrics {
    pub pair_id: String,
    pub strategy: String,
    pub pcr_auc: Option<f64>,
    pub miou_auc: Option<f64>,
    pub pck: Option<f64>,
    pub rs_size: Option<usize>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean of every field present on all rows, labelled `mean`.
pub fn aggregate(rows: &[PairMetrics]) -> Option<PairMetrics> {
    let first = rows.first()?;
    let strategy = if rows.iter().all(|r| r.strategy == first.strategy) {
        first.strategy.clone()
    } else {
        "mixed".into()
    };
    Some(PairMetrics {
        pair_id: "mean".into(),
        strategy,
        pcr_auc: mean_of(rows.iter().map(|r| r.pcr_auc)),
        miou_auc: mean_of(rows.iter().map(|r| r.miou_auc)),
        pck: mean_of(rows.iter().map(|r| r.pck)),
        rs_size: mean_of(rows.iter().map(|r| r.rs_size.map(|n| n as f64)))
            .map(|m| m.round() as usize),
    })
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Per-pair rows followed by the `mean` row.
pub fn write_metrics_csv(rows: &[PairMetrics], alpha: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let pck_col = format!("pck@{alpha}");
    w.write_record(["pair_id", "strategy", "pcr_auc", "miou_auc", pck_col.as_str(), "rs_size"])
        .map_err(io)?;
    for r in rows.iter().chain(aggregate(rows).as_ref()) {
        w.write_record([
            r.pair_id.clone(),
            r.strategy.clone(),
            fmt_opt(r.pcr_auc),
            fmt_opt(r.miou_auc),
            fmt_opt(r.pck),
            fmt_opt(r.rs_size),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    alpha: f64,
    pairs: &'a [PairMetrics],
    mean: Option<PairMetrics>,
}

pub fn write_metrics_json(rows: &[PairMetrics], alpha: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = MetricsDoc {
        alpha,
        pairs: rows,
        mean: aggregate(rows),
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::io(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads the rows written by [`write_metrics_csv`], `mean` row included.
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<PairMetrics>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::io(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 6 {
            return Err(Error::parse(path, line, "expected 6 fields"));
        }
        fn opt<T: std::str::FromStr>(field: &str) -> std::result::Result<Option<T>, String> {
            if field.is_empty() {
                return Ok(None);
            }
            field.parse().map(Some).map_err(|_| format!("bad value '{field}'"))
        }
        let bad = |reason: String| Error::parse(path, line, reason);
        out.push(PairMetrics {
            pair_id: record[0].to_string(),
            strategy: record[1].to_string(),
            pcr_auc: opt(&record[2]).map_err(bad)?,
            miou_auc: opt(&record[3]).map_err(bad)?,
            pck: opt(&record[4]).map_err(bad)?,
            rs_size: opt(&record[5]).map_err(bad)?,
        });
    }
    Ok(out)
}
