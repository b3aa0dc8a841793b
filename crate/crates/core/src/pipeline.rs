//! Run configuration and the stage drivers behind the `proposalflow` binary:
//! proposals, descriptors, matching, flow, warping and evaluation, for one
//! pair or a whole manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::benchmark::{
    ground_truth, miou_at_k, pck_annotated, pcr_curve, read_manifest, tau_grid,
    upper_bound_curve, write_metrics_csv, write_metrics_json, AnnotatedImage, GroundTruth,
    MetricCurve, PairEntry, PairMetrics, DEFAULT_ALPHA,
};
use crate::error::{Error, Result};
use crate::features::{
    describe_proposals, read_descriptors, whiten, DescriptorKind, DescriptorSet,
    DEFAULT_PATCH_SIDE,
};
use crate::flowfield::{densify, FillMode};
use crate::geometry::GaussianKernel;
use crate::imageio::{load_image, save_image, warp_backward, write_flo, FlowField, Image, InvalidPixels};
use crate::matching::{appearance_matrix, Assignment, HoughConfig, Matcher, PhmMode, Strategy};
use crate::proposals::{
    gaussian_sample, import_proposals, sliding_window, uniform_sample, ProposalSet,
    DEFAULT_BUDGET,
};

/// Smallest image side accepted by the pipeline.
pub const MIN_IMAGE_SIDE: usize = 8;
/// Name of the effective-configuration file written to output directories.
pub const CONFIG_ECHO: &str = "config.txt";

/// Where proposals come from. `import:<path>` names a CSV file, or a
/// directory holding `<image stem>.csv` per image.
#[derive(Debug, Clone, PartialEq)]
pub enum ProposalSource {
    SlidingWindow,
    Uniform,
    Gaussian,
    Import(PathBuf),
}

impl FromStr for ProposalSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sw" => Ok(ProposalSource::SlidingWindow),
            "us" => Ok(ProposalSource::Uniform),
            "gs" => Ok(ProposalSource::Gaussian),
            _ => match s.strip_prefix("import:") {
                Some(p) if !p.is_empty() => Ok(ProposalSource::Import(p.into())),
                _ => Err(Error::InvalidArgument(format!(
                    "proposal source '{s}' is not sw, us, gs or import:<path>"
                ))),
            },
        }
    }
}

impl fmt::Display for ProposalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProposalSource::SlidingWindow => f.write_str("sw"),
            ProposalSource::Uniform => f.write_str("us"),
            ProposalSource::Gaussian => f.write_str("gs"),
            ProposalSource::Import(p) => write!(f, "import:{}", p.display()),
        }
    }
}

/// Where descriptors come from; `import:<path>` resolves like proposals.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    Hog,
    Import(PathBuf),
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hog" => Ok(FeatureSource::Hog),
            _ => match s.strip_prefix("import:") {
                Some(p) if !p.is_empty() => Ok(FeatureSource::Import(p.into())),
                _ => Err(Error::InvalidArgument(format!(
                    "feature source '{s}' is not hog or import:<path>"
                ))),
            },
        }
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSource::Hog => f.write_str("hog"),
            FeatureSource::Import(p) => write!(f, "import:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub proposals: ProposalSource,
    pub budget: usize,
    /// Seeded random selection of imported proposals instead of the top
    /// scores.
    pub shuffle: Option<u64>,
    pub features: FeatureSource,
    pub seed: u64,
    pub bins: [usize; 3],
    /// Spatial kernel bandwidth; `None` means 0.1 * max(W, H) of the source.
    pub sigma_xy: Option<f64>,
    pub sigma_s: f64,
    pub fill: FillMode,
    pub tau_samples: usize,
    pub alpha: f64,
    /// Worker threads; `None` lets rayon decide. Not echoed, since outputs
    /// do not depend on it.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: Strategy::Lom,
            proposals: ProposalSource::SlidingWindow,
            budget: DEFAULT_BUDGET,
            shuffle: None,
            features: FeatureSource::Hog,
            seed: 0,
            bins: HoughConfig::default().bins,
            sigma_xy: None,
            sigma_s: 0.5,
            fill: FillMode::default(),
            tau_samples: 101,
            alpha: DEFAULT_ALPHA,
            threads: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse '{value}'")))
}

fn parse_bins(value: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = value.split(['x', ',']).collect();
    match parts.as_slice() {
        [one] => {
            let b = parse_num("bins", one)?;
            Ok([b, b, b])
        }
        [a, b, c] => Ok([parse_num("bins", a)?, parse_num("bins", b)?, parse_num("bins", c)?]),
        _ => Err(Error::InvalidArgument(format!(
            "bins: expected N or AxBxC, got '{value}'"
        ))),
    }
}

impl RunConfig {
    /// Sets one parameter from its textual form (config-file key or flag
    /// name, `-` and `_` interchangeable).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "strategy" => self.strategy = value.parse()?,
            "proposals" => self.proposals = value.parse()?,
            "budget" => self.budget = parse_num(key, value)?,
            "shuffle" => {
                self.shuffle = match value {
                    "none" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "features" => self.features = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            "bins" => self.bins = parse_bins(value)?,
            "sigma_xy" => {
                self.sigma_xy = match value {
                    "auto" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "sigma_s" => self.sigma_s = parse_num(key, value)?,
            "fill" => self.fill = value.parse()?,
            "tau_samples" => self.tau_samples = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "threads" => self.threads = Some(parse_num(key, value)?),
            other => {
                return Err(Error::InvalidArgument(format!("unknown config key '{other}'")))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i as u64 + 1, "expected key = value"))?;
            self.set(k, v).map_err(|e| Error::parse(origin, i as u64 + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Defaults overridden by a config file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_str(&text, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        if self.bins.iter().any(|&b| b < 3) {
            return bad(format!("bins {:?}: each axis needs at least 3", self.bins));
        }
        if self.sigma_xy.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("sigma_xy must be positive".into());
        }
        if !(self.sigma_s > 0.0 && self.sigma_s.is_finite()) {
            return bad("sigma_s must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if self.tau_samples < 2 {
            return bad("tau_samples must be at least 2".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    /// The effective configuration as `key = value` lines.
    pub fn echo(&self) -> String {
        let sigma_xy = self.sigma_xy.map_or("auto".to_string(), |s| s.to_string());
        format!(
            "strategy = {}\nproposals = {}\nbudget = {}\nshuffle = {}\nfeatures = {}\nseed = {}\n\
             bins = {}x{}x{}\nsigma_xy = {}\nsigma_s = {}\nfill = {}\ntau_samples = {}\nalpha = {}\n",
            self.strategy,
            self.proposals,
            self.budget,
            self.shuffle.map_or("none".to_string(), |s| s.to_string()),
            self.features,
            self.seed,
            self.bins[0],
            self.bins[1],
            self.bins[2],
            sigma_xy,
            self.sigma_s,
            self.fill,
            self.tau_samples,
            self.alpha
        )
    }

    pub fn write_echo(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(CONFIG_ECHO);
        std::fs::write(&path, self.echo()).map_err(|e| Error::io(&path, e))
    }

    pub fn kernel(&self, src: &Image) -> GaussianKernel {
        let base = GaussianKernel::for_image(src.width(), src.height());
        GaussianKernel::new(self.sigma_xy.unwrap_or(base.sigma_xy), self.sigma_s)
    }

    pub fn matcher(&self, src: &Image) -> Matcher {
        let kernel = self.kernel(src);
        match self.strategy {
            Strategy::Nam => Matcher::Nam,
            Strategy::Phm => Matcher::Phm {
                kernel,
                mode: PhmMode::Binned(HoughConfig {
                    bins: self.bins,
                    ..HoughConfig::default()
                }),
            },
            Strategy::Lom => Matcher::Lom { kernel },
        }
    }

    /// Runs `f` on a pool of the configured size.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Loads an image and checks the pipeline's minimum size.
pub fn load_checked(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = load_image(path)?;
    if img.width().min(img.height()) < MIN_IMAGE_SIDE {
        return Err(Error::InvalidImage(format!(
            "{}: {}x{} is below the {MIN_IMAGE_SIDE} px minimum",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(img)
}

/// A directory resolves to `<dir>/<image stem>.csv`; anything else is used as is.
fn resolve_import(base: &Path, image_path: &Path) -> PathBuf {
    if base.is_dir() {
        let stem = image_path.file_stem().unwrap_or_default();
        base.join(stem).with_extension("csv")
    } else {
        base.to_path_buf()
    }
}

pub fn proposals_for(cfg: &RunConfig, img: &Image, image_path: &Path) -> Result<ProposalSet> {
    let (w, h) = img.dims();
    match &cfg.proposals {
        ProposalSource::SlidingWindow => sliding_window(w, h, cfg.budget),
        ProposalSource::Uniform => uniform_sample(w, h, cfg.budget, cfg.seed),
        ProposalSource::Gaussian => gaussian_sample(w, h, cfg.budget, cfg.seed),
        ProposalSource::Import(base) => {
            let set = import_proposals(resolve_import(base, image_path), w, h, cfg.budget, cfg.shuffle)?.set;
            if set.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no usable proposals imported for {}",
                    image_path.display()
                )));
            }
            Ok(set)
        }
    }
}

/// Raw descriptors of `props`, computed or imported.
pub fn descriptors_for(cfg: &RunConfig, img: &Image, image_path: &Path, props: &ProposalSet) -> Result<DescriptorSet> {
    match &cfg.features {
        FeatureSource::Hog => describe_proposals(img, props, DEFAULT_PATCH_SIDE),
        FeatureSource::Import(base) => {
            let set = read_descriptors(resolve_import(base, image_path))?;
            if set.len() != props.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} descriptors for {} proposals of {}",
                    set.len(),
                    props.len(),
                    image_path.display()
                )));
            }
            Ok(set)
        }
    }
}

/// One image of a pair: pixels plus the path used to resolve imports.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub image: &'a Image,
    pub path: &'a Path,
}

#[derive(Debug, Clone)]
pub struct MatchRun {
    pub src: ProposalSet,
    pub dst: ProposalSet,
    pub assignment: Assignment,
}

/// Proposals, descriptors (whitened unless histograms) and region matches.
pub fn match_pair(cfg: &RunConfig, pair: &str, src: Frame, dst: Frame) -> Result<MatchRun> {
    let rs = proposals_for(cfg, src.image, src.path).map_err(|e| e.at_stage(pair, "propose"))?;
    let rd = proposals_for(cfg, dst.image, dst.path).map_err(|e| e.at_stage(pair, "propose"))?;
    let describe = || -> Result<(DescriptorSet, DescriptorSet)> {
        let fs = descriptors_for(cfg, src.image, src.path, &rs)?;
        let fd = descriptors_for(cfg, dst.image, dst.path, &rd)?;
        if fs.kind() == DescriptorKind::ImportedHistogram {
            return Ok((fs, fd));
        }
        let mut w = whiten(&[&fs, &fd])?;
        let fd = w.pop().expect("two sets");
        let fs = w.pop().expect("two sets");
        Ok((fs, fd))
    };
    let (fs, fd) = describe().map_err(|e| e.at_stage(pair, "describe"))?;
    let assignment = appearance_matrix(&fs, &fd)
        .and_then(|a| cfg.matcher(src.image).run(&rs, &rd, &a))
        .map_err(|e| e.at_stage(pair, "match"))?;
    Ok(MatchRun {
        src: rs,
        dst: rd,
        assignment,
    })
}

pub fn flow_for(cfg: &RunConfig, pair: &str, run: &MatchRun, src: &Image) -> Result<FlowField> {
    densify(&run.src, &run.dst, &run.assignment, src, cfg.fill).map_err(|e| e.at_stage(pair, "flow"))
}

#[derive(Debug, Clone)]
pub struct RegionEvaluation {
    pub ground_truth: GroundTruth,
    pub pcr: MetricCurve,
    pub miou: MetricCurve,
    pub upper_bound: MetricCurve,
}

pub fn evaluate_regions(
    cfg: &RunConfig,
    pair: &str,
    run: &MatchRun,
    src: &AnnotatedImage,
    dst: &AnnotatedImage,
) -> Result<RegionEvaluation> {
    let eval = || -> Result<RegionEvaluation> {
        let taus = tau_grid(cfg.tau_samples);
        let gt = ground_truth(&run.src, src, dst)?;
        Ok(RegionEvaluation {
            pcr: pcr_curve(&run.assignment, &run.dst, &gt, &taus)?,
            miou: miou_at_k(&run.assignment, &run.dst, &gt),
            upper_bound: upper_bound_curve(&run.dst, &gt, &taus)?,
            ground_truth: gt,
        })
    };
    eval().map_err(|e| e.at_stage(pair, "evaluate"))
}

/// Everything computed for one manifest pair.
#[derive(Debug, Clone)]
pub struct PairResult {
    pub pair_id: String,
    pub run: MatchRun,
    pub flow: FlowField,
    pub warped: Image,
    pub regions: RegionEvaluation,
    pub metrics: PairMetrics,
}

pub fn run_pair(cfg: &RunConfig, entry: &PairEntry) -> Result<PairResult> {
    let pair = entry.pair_id.as_str();
    let load = || -> Result<(AnnotatedImage, AnnotatedImage)> {
        load_checked(&entry.src_image)?;
        load_checked(&entry.dst_image)?;
        entry.load()
    };
    let (src, dst) = load().map_err(|e| e.at_stage(pair, "load"))?;
    let run = match_pair(
        cfg,
        pair,
        Frame {
            image: &src.image,
            path: &entry.src_image,
        },
        Frame {
            image: &dst.image,
            path: &entry.dst_image,
        },
    )?;
    let flow = flow_for(cfg, pair, &run, &src.image)?;
    let warped =
        warp_backward(&dst.image, &flow, InvalidPixels::UseFlow).map_err(|e| e.at_stage(pair, "warp"))?;
    let regions = evaluate_regions(cfg, pair, &run, &src, &dst)?;
    let pck = pck_annotated(&flow, &src, &dst, cfg.alpha).map_err(|e| e.at_stage(pair, "evaluate"))?;
    let metrics = PairMetrics {
        pair_id: entry.pair_id.clone(),
        strategy: cfg.strategy.to_string(),
        pcr_auc: Some(regions.pcr.auc),
        miou_auc: Some(regions.miou.auc),
        pck: Some(pck),
        rs_size: Some(regions.ground_truth.len()),
    };
    Ok(PairResult {
        pair_id: entry.pair_id.clone(),
        run,
        flow,
        warped,
        regions,
        metrics,
    })
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Image file name with the extension matching its channel count.
pub fn image_file_name(stem: &str, img: &Image) -> String {
    format!("{stem}.{}", if img.channels() == 1 { "pgm" } else { "ppm" })
}

/// Writes the per-pair artifacts into `dir`.
pub fn write_pair_outputs(result: &PairResult, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    result.run.src.write_csv(dir.join("src_proposals.csv"))?;
    result.run.dst.write_csv(dir.join("dst_proposals.csv"))?;
    result.run.assignment.write_csv(dir.join("matches.csv"))?;
    write_flo(&result.flow, dir.join("flow.flo"))?;
    save_image(&result.warped, dir.join(image_file_name("warped", &result.warped)))?;
    result.regions.pcr.write_csv("tau", dir.join("pcr.csv"))?;
    result.regions.upper_bound.write_csv("tau", dir.join("upper_bound.csv"))?;
    result.regions.miou.write_csv("k", dir.join("miou.csv"))?;
    Ok(())
}

/// Runs every manifest pair and writes `metrics.csv`, `metrics.json`, the
/// config echo and a `pairs/<pair_id>/` directory per pair under `out`.
pub fn run_bench(cfg: &RunConfig, manifest: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<Vec<PairMetrics>> {
    cfg.validate()?;
    let out = out.as_ref();
    let entries = read_manifest(manifest)?;
    let results: Vec<PairResult> = cfg.install(|| {
        entries
            .par_iter()
            .map(|e| run_pair(cfg, e))
            .collect::<Result<Vec<_>>>()
    })??;
    create_dir(out)?;
    cfg.write_echo(out)?;
    for r in &results {
        write_pair_outputs(r, &out.join("pairs").join(&r.pair_id))?;
    }
    let rows: Vec<PairMetrics> = results.into_iter().map(|r| r.metrics).collect();
    write_metrics_csv(&rows, cfg.alpha, out.join("metrics.csv"))?;
    write_metrics_json(&rows, cfg.alpha, out.join("metrics.json"))?;
    Ok(rows)
}
