//! Baseline object proposals (sliding window, uniform and Gaussian sampling)
//! and CSV import/export of externally computed proposals.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Smallest window side emitted by the built-in generators.
pub const MIN_SIDE: f64 = 16.0;
/// Smallest admissible proposal area in px².
pub const MIN_AREA: f64 = 16.0;
/// Default proposal budget per image.
pub const DEFAULT_BUDGET: usize = 1000;

const ASPECTS: [f64; 5] = [
    0.5,
    std::f64::consts::FRAC_1_SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
    2.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub bbox: BBox,
    /// Generator confidence, 0 when the generator has none.
    pub score: f64,
    pub id: usize,
}

/// Proposals of one image; ids run `0..n` in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub width: usize,
    pub height: usize,
    proposals: Vec<Proposal>,
}

impl ProposalSet {
    /// Builds a set from `(box, score)` pairs, checking that every box lies
    /// inside the image and has area of at least 16 px².
    pub fn new(width: usize, height: usize, boxes: Vec<(BBox, f64)>) -> Result<Self> {
        let (w, h) = (width as f64, height as f64);
        let mut proposals = Vec::with_capacity(boxes.len());
        for (id, (bbox, score)) in boxes.into_iter().enumerate() {
            bbox.validate()?;
            let eps = 1e-9 * w.max(h);
            if bbox.x_min < -eps || bbox.y_min < -eps || bbox.x_max > w + eps || bbox.y_max > h + eps
            {
                return Err(Error::InvalidArgument(format!(
                    "proposal {id} {bbox:?} leaves the {width}x{height} image"
                )));
            }
            if bbox.area() < MIN_AREA {
                return Err(Error::InvalidArgument(format!(
                    "proposal {id} has area {} < {MIN_AREA}",
                    bbox.area()
                )));
            }
            proposals.push(Proposal { bbox, score, id });
        }
        Ok(ProposalSet {
            width,
            height,
            proposals,
        })
    }

    pub fn from_boxes(width: usize, height: usize, boxes: &[BBox]) -> Result<Self> {
        Self::new(width, height, boxes.iter().map(|b| (*b, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn get(&self, id: usize) -> &Proposal {
        &self.proposals[id]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Proposal> {
        self.proposals.iter()
    }

    pub fn boxes(&self) -> Vec<BBox> {
        self.proposals.iter().map(|p| p.bbox).collect()
    }

    /// Writes `x_min,y_min,x_max,y_max,score`, one proposal per row in id order.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
        let io = |e: csv::Error| Error::io(path, e);
        w.write_record(["x_min", "y_min", "x_max", "y_max", "score"])
            .map_err(io)?;
        for p in &self.proposals {
            let b = p.bbox;
            w.write_record([
                b.x_min.to_string(),
                b.y_min.to_string(),
                b.x_max.to_string(),
                b.y_max.to_string(),
                p.score.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl<'a> IntoIterator for &'a ProposalSet {
    type Item = &'a Proposal;
    type IntoIter = std::slice::Iter<'a, Proposal>;

    fn into_iter(self) -> Self::IntoIter {
        self.proposals.iter()
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if (width.min(height) as f64) < MIN_SIDE {
        return Err(Error::InvalidArgument(format!(
            "{width}x{height} image is smaller than the {MIN_SIDE} px minimum window"
        )));
    }
    Ok(())
}

/// Deterministic multi-scale grid of windows.
///
/// Sides grow by `sqrt(2)` from 16 px up to `min(W, H)`; each side is tried
/// at five aspect ratios (width/height in `{1/2, 1/sqrt2, 1, sqrt2, 2}`,
/// area preserved) and slid with a stride of a quarter of the window in each
/// axis. Enumeration is scale-major, then aspect, then row-major; when the
/// grid exceeds `limit` it is subsampled at evenly spaced indices.
pub fn sliding_window(width: usize, height: usize, limit: usize) -> Result<ProposalSet> {
    check_dims(width, height)?;
    if limit == 0 {
        return Err(Error::InvalidArgument("proposal limit must be >= 1".into()));
    }
    let (w, h) = (width as f64, height as f64);
    let max_side = w.min(h);
    let eps = 1e-9;
    let mut boxes = Vec::new();
    let mut k = 0;
    loop {
        let side = MIN_SIDE * 2f64.powf(k as f64 / 2.0);
        if side > max_side + eps {
            break;
        }
        for aspect in ASPECTS {
            let bw = side * aspect.sqrt();
            let bh = side / aspect.sqrt();
            if bw > w + eps || bh > h + eps {
                continue;
            }
            let (sx, sy) = (bw / 4.0, bh / 4.0);
            let rows = ((h - bh) / sy + eps).floor() as usize + 1;
            let cols = ((w - bw) / sx + eps).floor() as usize + 1;
            for r in 0..rows {
                for c in 0..cols {
                    let x0 = c as f64 * sx;
                    let y0 = r as f64 * sy;
                    boxes.push(BBox {
                        x_min: x0,
                        y_min: y0,
                        x_max: (x0 + bw).min(w),
                        y_max: (y0 + bh).min(h),
                    });
                }
            }
        }
        k += 1;
    }
    let total = boxes.len();
    let picked: Vec<(BBox, f64)> = if total > limit {
        (0..limit).map(|i| (boxes[i * total / limit], 0.0)).collect()
    } else {
        boxes.into_iter().map(|b| (b, 0.0)).collect()
    };
    ProposalSet::new(width, height, picked)
}

/// Side and aspect shared by the random generators: log-side uniform in
/// `[ln 16, ln min(W, H)]`, log-aspect uniform in `[-ln 2, ln 2]`.
fn random_extent(rng: &mut ChaCha8Rng, max_side: f64) -> (f64, f64) {
    let side = if max_side > MIN_SIDE {
        rng.random_range(MIN_SIDE.ln()..max_side.ln()).exp()
    } else {
        MIN_SIDE
    };
    let ln2 = std::f64::consts::LN_2;
    let aspect = rng.random_range(-ln2..ln2).exp();
    (side * aspect.sqrt(), side / aspect.sqrt())
}

fn sample_boxes(
    width: usize,
    height: usize,
    n: usize,
    seed: u64,
    mut center: impl FnMut(&mut ChaCha8Rng) -> (f64, f64),
) -> Result<ProposalSet> {
    check_dims(width, height)?;
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let (w, h) = (width as f64, height as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boxes = Vec::with_capacity(n);
    while boxes.len() < n {
        let (cx, cy) = center(&mut rng);
        let (bw, bh) = random_extent(&mut rng, w.min(h));
        let raw = BBox {
            x_min: cx - 0.5 * bw,
            y_min: cy - 0.5 * bh,
            x_max: cx + 0.5 * bw,
            y_max: cy + 0.5 * bh,
        };
        if let Some(b) = raw.clip(w, h).filter(|b| b.area() >= MIN_AREA) {
            boxes.push((b, 0.0));
        }
    }
    ProposalSet::new(width, height, boxes)
}

/// `n` boxes with centers uniform over the image, clipped to bounds.
pub fn uniform_sample(width: usize, height: usize, n: usize, seed: u64) -> Result<ProposalSet> {
    let (w, h) = (width as f64, height as f64);
    sample_boxes(width, height, n, seed, |rng| {
        (rng.random_range(0.0..w), rng.random_range(0.0..h))
    })
}

/// Like [`uniform_sample`] but centers follow a normal distribution around
/// the image center with a standard deviation of a quarter of each
/// dimension; centers falling outside the image are redrawn.
pub fn gaussian_sample(width: usize, height: usize, n: usize, seed: u64) -> Result<ProposalSet> {
    let (w, h) = (width as f64, height as f64);
    let nx = Normal::new(0.5 * w, 0.25 * w).expect("positive std");
    let ny = Normal::new(0.5 * h, 0.25 * h).expect("positive std");
    sample_boxes(width, height, n, seed, move |rng| gaussian_center(rng, &nx, &ny, w, h))
}

fn gaussian_center(rng: &mut ChaCha8Rng, nx: &Normal<f64>, ny: &Normal<f64>, w: f64, h: f64) -> (f64, f64) {
    let redraw = |rng: &mut ChaCha8Rng, d: &Normal<f64>, limit: f64| loop {
        let v = d.sample(rng);
        if (0.0..limit).contains(&v) {
            break v;
        }
    };
    let cx = redraw(rng, nx, w);
    (cx, redraw(rng, ny, h))
}

/// Result of [`import_proposals`].
#[derive(Debug, Clone)]
pub struct ImportedProposals {
    pub set: ProposalSet,
    /// Rows dropped because nothing of at least 16 px² survived clipping.
    pub rejected: usize,
}

/// Reads a proposal CSV (`x_min,y_min,x_max,y_max[,score]`).
///
/// Boxes are clipped to the image. With scores, the `limit` best are kept
/// (ties in file order); without, the first `limit` rows. `shuffle` replaces
/// either rule by a seeded random selection.
pub fn import_proposals(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    limit: usize,
    shuffle: Option<u64>,
) -> Result<ImportedProposals> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e))?;
    let (w, h) = (width as f64, height as f64);
    let mut rows: Vec<(BBox, Option<f64>)> = Vec::new();
    let mut rejected = 0;
    let mut with_score: Option<bool> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::io(path, e))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            // header row
            with_score = Some(record.len() == 5);
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 4 && record.len() != 5 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 4 or 5 fields, found {}", record.len()),
            ));
        }
        let has_score = record.len() == 5;
        if *with_score.get_or_insert(has_score) != has_score {
            return Err(Error::parse(path, line, "score column present on some rows only"));
        }
        let mut v = [0.0; 5];
        for (i, field) in record.iter().enumerate() {
            v[i] = field
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad number '{field}'")))?;
        }
        if v[2] < v[0] || v[3] < v[1] {
            return Err(Error::parse(
                path,
                line,
                format!("inverted box ({}, {}, {}, {})", v[0], v[1], v[2], v[3]),
            ));
        }
        let raw = BBox {
            x_min: v[0],
            y_min: v[1],
            x_max: v[2],
            y_max: v[3],
        };
        match raw.clip(w, h).filter(|b| b.area() >= MIN_AREA) {
            Some(b) => rows.push((b, has_score.then_some(v[4]))),
            None => rejected += 1,
        }
    }

    if let Some(seed) = shuffle {
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    } else if with_score == Some(true) {
        // stable: ties keep file order
        rows.sort_by(|a, b| b.1.unwrap_or(0.0).total_cmp(&a.1.unwrap_or(0.0)));
    }
    rows.truncate(limit);
    let set = ProposalSet::new(
        width,
        height,
        rows.into_iter().map(|(b, s)| (b, s.unwrap_or(0.0))).collect(),
    )?;
    Ok(ImportedProposals { set, rejected })
}
