//! Full benchmark over a manifest of synthetic annotated pairs, as the `bench`
//! subcommand runs it.
//!
//! `cargo run --release --example benchmark [out_dir] [pairs]`

use std::path::{Path, PathBuf};

use proposal_flow::benchmark::{aggregate, write_bbox, write_keypoints};
use proposal_flow::pipeline::{run_bench, RunConfig};
use proposal_flow::prelude::*;
use proposal_flow::synthetic::clutter_pair;

fn write_dataset(dir: &Path, pairs: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("pair_id,src_image,dst_image,src_kp,dst_kp,src_bb,dst_bb\n");
    for i in 0..pairs {
        let p = clutter_pair(96, 80, i)?;
        let id = format!("pair{i:02}");
        for (side, ann) in [("src", &p.src), ("dst", &p.dst)] {
            save_image(&ann.image, dir.join(format!("{id}_{side}.pgm")))?;
            write_keypoints(&ann.keypoints, dir.join(format!("{id}_{side}_kp.csv")))?;
            write_bbox(&ann.bbox, dir.join(format!("{id}_{side}_bb.txt")))?;
        }
        manifest.push_str(&format!(
            "{id},{id}_src.pgm,{id}_dst.pgm,{id}_src_kp.csv,{id}_dst_kp.csv,{id}_src_bb.txt,{id}_dst_bb.txt\n"
        ));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "bench-out".into()));
    let pairs = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    let manifest = write_dataset(&out.join("data"), pairs)?;

    for strategy in [Strategy::Nam, Strategy::Phm, Strategy::Lom] {
        let cfg = RunConfig {
            strategy,
            budget: 300,
            ..RunConfig::default()
        };
        let rows = run_bench(&cfg, &manifest, out.join(strategy.to_string()))?;
        let mean = aggregate(&rows).expect("no pairs");
        println!(
            "{strategy}: PCR AuC {:.3}, mIoU@k AuC {:.3}, PCK@{} {:.3}",
            mean.pcr_auc.unwrap_or(f64::NAN),
            mean.miou_auc.unwrap_or(f64::NAN),
            cfg.alpha,
            mean.pck.unwrap_or(f64::NAN),
        );
    }
    println!("results under {}", out.display());
    Ok(())
}
