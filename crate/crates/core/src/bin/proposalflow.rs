use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proposal_flow::benchmark::{
    common_keypoints, load_annotated, pck, read_bbox, read_keypoints, write_metrics_csv,
    write_metrics_json, PairMetrics,
};
use proposal_flow::features::write_descriptors;
use proposal_flow::imageio::{read_flo, save_image, warp_backward, write_flo, InvalidPixels};
use proposal_flow::matching::Assignment;
use proposal_flow::pipeline::{
    descriptors_for, evaluate_regions, flow_for, image_file_name, load_checked, match_pair,
    proposals_for, run_bench, Frame, MatchRun, RunConfig,
};
use proposal_flow::{Error, Result};

/// Region matching and dense flow with object proposals.
#[derive(Parser)]
#[command(name = "proposalflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// nam | phm | lom
    #[arg(long)]
    strategy: Option<String>,
    /// sw | us | gs | import:<file or dir>
    #[arg(long)]
    proposals: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    /// Seed for random selection of imported proposals.
    #[arg(long)]
    shuffle: Option<String>,
    /// hog | import:<file or dir>
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// N or AxBxC
    #[arg(long)]
    bins: Option<String>,
    /// Spatial kernel bandwidth in px, or `auto`.
    #[arg(long)]
    sigma_xy: Option<String>,
    #[arg(long)]
    sigma_s: Option<String>,
    /// none | nearest | joint_bilateral
    #[arg(long)]
    fill: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, env = "PROPOSALFLOW_THREADS")]
    threads: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("strategy", &self.strategy),
            ("proposals", &self.proposals),
            ("budget", &self.budget),
            ("shuffle", &self.shuffle),
            ("features", &self.features),
            ("seed", &self.seed),
            ("bins", &self.bins),
            ("sigma_xy", &self.sigma_xy),
            ("sigma_s", &self.sigma_s),
            ("fill", &self.fill),
            ("alpha", &self.alpha),
            ("threads", &self.threads),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::Io {
            path: self.out.clone(),
            reason: e.to_string(),
        })?;
        cfg.write_echo(&self.out)?;
        Ok(&self.out)
    }
}

#[derive(Args)]
struct PairArgs {
    /// Source image (PGM/PPM).
    src: PathBuf,
    /// Target image.
    dst: PathBuf,
    /// Reuse a matches CSV instead of matching again.
    #[arg(long)]
    matches: Option<PathBuf>,
}

#[derive(Args)]
struct Annotations {
    #[arg(long)]
    src_kp: PathBuf,
    #[arg(long)]
    dst_kp: PathBuf,
    #[arg(long)]
    src_bb: PathBuf,
    #[arg(long)]
    dst_bb: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Writes `<stem>.csv` proposals per image.
    Propose {
        images: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Writes `<stem>.csv` raw descriptors per image.
    Describe {
        images: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Matches the proposals of two images.
    Match {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Dense flow from region matches.
    Flow {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Warps the target image onto the source grid with a flow field.
    Warp {
        /// Target image.
        target: PathBuf,
        /// Flow file (.flo).
        flow: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// PCR, mIoU@k and upper-bound curves of region matches.
    EvalRegion {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        ann: Annotations,
        #[command(flatten)]
        common: Common,
    },
    /// PCK of a flow field.
    EvalFlow {
        /// Flow file (.flo).
        flow: PathBuf,
        #[arg(long)]
        src_kp: PathBuf,
        #[arg(long)]
        dst_kp: PathBuf,
        #[arg(long)]
        dst_bb: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Full pipeline and metrics over a manifest of pairs.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

const PAIR: &str = "pair";

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn pair_matches(cfg: &RunConfig, pair: &PairArgs) -> Result<(MatchRun, proposal_flow::imageio::Image)> {
    let src = load_checked(&pair.src).map_err(|e| e.at_stage(PAIR, "load"))?;
    let dst = load_checked(&pair.dst).map_err(|e| e.at_stage(PAIR, "load"))?;
    let run = match &pair.matches {
        Some(path) => {
            let reuse = || -> Result<MatchRun> {
                let rs = proposals_for(cfg, &src, &pair.src)?;
                let rd = proposals_for(cfg, &dst, &pair.dst)?;
                let assignment = Assignment::read_csv(path, cfg.strategy)?;
                if assignment.len() != rs.len() || assignment.targets().iter().any(|&t| t >= rd.len()) {
                    return Err(Error::DimensionMismatch(format!(
                        "{} does not match {} source / {} target proposals",
                        path.display(),
                        rs.len(),
                        rd.len()
                    )));
                }
                Ok(MatchRun {
                    src: rs,
                    dst: rd,
                    assignment,
                })
            };
            reuse().map_err(|e| e.at_stage(PAIR, "match"))?
        }
        None => match_pair(
            cfg,
            PAIR,
            Frame {
                image: &src,
                path: &pair.src,
            },
            Frame {
                image: &dst,
                path: &pair.dst,
            },
        )?,
    };
    Ok((run, src))
}

fn write_run(run: &MatchRun, out: &Path) -> Result<()> {
    run.src.write_csv(out.join("src_proposals.csv"))?;
    run.dst.write_csv(out.join("dst_proposals.csv"))?;
    run.assignment.write_csv(out.join("matches.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Propose { images, common } => {
            let cfg = common.config()?;
            let out = common.out_dir(&cfg)?;
            for path in &images {
                let id = stem(path);
                let img = load_checked(path).map_err(|e| e.at_stage(&id, "load"))?;
                let set = proposals_for(&cfg, &img, path).map_err(|e| e.at_stage(&id, "propose"))?;
                set.write_csv(out.join(format!("{id}.csv")))?;
            }
            Ok(())
        }
        Command::Describe { images, common } => {
            let cfg = common.config()?;
            let out = common.out_dir(&cfg)?;
            let sets = cfg.install(|| {
                images
                    .iter()
                    .map(|path| {
                        let id = stem(path);
                        let img = load_checked(path).map_err(|e| e.at_stage(&id, "load"))?;
                        let props =
                            proposals_for(&cfg, &img, path).map_err(|e| e.at_stage(&id, "propose"))?;
                        descriptors_for(&cfg, &img, path, &props)
                            .map(|d| (id.clone(), d))
                            .map_err(|e| e.at_stage(&id, "describe"))
                    })
                    .collect::<Result<Vec<_>>>()
            })??;
            for (id, set) in &sets {
                write_descriptors(set, out.join(format!("{id}.csv")))?;
            }
            Ok(())
        }
        Command::Match { pair, common } => {
            let cfg = common.config()?;
            let out = common.out_dir(&cfg)?;
            let (run, _) = cfg.install(|| pair_matches(&cfg, &pair))??;
            write_run(&run, out)
        }
        Command::Flow { pair, common } => {
            let cfg = common.config()?;
            let out = common.out_dir(&cfg)?;
            let (run, flow) = cfg.install(|| -> Result<_> {
                let (run, src) = pair_matches(&cfg, &pair)?;
                let flow = flow_for(&cfg, PAIR, &run, &src)?;
                Ok((run, flow))
            })??;
            write_run(&run, out)?;
            write_flo(&flow, out.join("flow.flo"))
        }
        Command::Warp {
            target,
            flow,
            common,
        } => {
            let cfg = common.config()?;
            let out = common.out_dir(&cfg)?;
            let warp = || -> Result<proposal_flow::imageio::Image> {
                let img = load_checked(&target)?;
                let f = read_flo(&flow)?;
                warp_backward(&img, &f, InvalidPixels::UseFlow)
            };
            let warped = warp().map_err(|e| e.at_stage(PAIR, "warp"))?;
            save_image(&warped, out.join(image_file_name("warped", &warped)))
        }
        Command::EvalRegion { pair, ann, common } => {
            let cfg = common.config()?;
            let out = common.out_dir(&cfg)?;
            let eval = cfg.install(|| -> Result<_> {
                let (run, _) = pair_matches(&cfg, &pair)?;
                let src = load_annotated(&pair.src, &ann.src_bb, &ann.src_kp)
                    .map_err(|e| e.at_stage(PAIR, "load"))?;
                let dst = load_annotated(&pair.dst, &ann.dst_bb, &ann.dst_kp)
                    .map_err(|e| e.at_stage(PAIR, "load"))?;
                evaluate_regions(&cfg, PAIR, &run, &src, &dst)
            })??;
            eval.pcr.write_csv("tau", out.join("pcr.csv"))?;
            eval.upper_bound.write_csv("tau", out.join("upper_bound.csv"))?;
            eval.miou.write_csv("k", out.join("miou.csv"))?;
            let rows = [PairMetrics {
                pair_id: PAIR.into(),
                strategy: cfg.strategy.to_string(),
                pcr_auc: Some(eval.pcr.auc),
                miou_auc: Some(eval.miou.auc),
                pck: None,
                rs_size: Some(eval.ground_truth.len()),
            }];
            write_metrics_csv(&rows, cfg.alpha, out.join("metrics.csv"))?;
            write_metrics_json(&rows, cfg.alpha, out.join("metrics.json"))
        }
        Command::EvalFlow {
            flow,
            src_kp,
            dst_kp,
            dst_bb,
            common,
        } => {
            let cfg = common.config()?;
            let out = common.out_dir(&cfg)?;
            let eval = || -> Result<f64> {
                let f = read_flo(&flow)?;
                let (s, d) = common_keypoints(&read_keypoints(&src_kp)?, &read_keypoints(&dst_kp)?);
                pck(&f, &s, &d, &read_bbox(&dst_bb)?, cfg.alpha)
            };
            let value = eval().map_err(|e| e.at_stage(PAIR, "evaluate"))?;
            let rows = [PairMetrics {
                pair_id: PAIR.into(),
                strategy: cfg.strategy.to_string(),
                pcr_auc: None,
                miou_auc: None,
                pck: Some(value),
                rs_size: None,
            }];
            write_metrics_csv(&rows, cfg.alpha, out.join("metrics.csv"))?;
            write_metrics_json(&rows, cfg.alpha, out.join("metrics.json"))
        }
        Command::Bench { manifest, common } => {
            let cfg = common.config()?;
            run_bench(&cfg, &manifest, &common.out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("proposalflow: {e}");
            ExitCode::FAILURE
        }
    }
}
