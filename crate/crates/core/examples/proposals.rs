//! The built-in proposal generators on one image size.
//!
//! `cargo run --example proposals [out_dir]` also writes the sets as CSV.

use proposal_flow::prelude::*;

fn summary(name: &str, set: &ProposalSet) {
    let n = set.len() as f64;
    let mean_area = set.iter().map(|p| p.bbox.area()).sum::<f64>() / n;
    let mean_cx = set.iter().map(|p| p.bbox.center()[0]).sum::<f64>() / n;
    println!("{name:>3}: {:5} boxes, mean area {mean_area:8.1}, mean center x {mean_cx:6.1}", set.len());
}

fn main() -> Result<()> {
    let (w, h) = (320, 240);
    let sets = [
        ("sw", sliding_window(w, h, 1000)?),
        ("us", uniform_sample(w, h, 1000, 0)?),
        ("gs", gaussian_sample(w, h, 1000, 0)?),
    ];
    for (name, set) in &sets {
        summary(name, set);
    }
    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (name, set) in &sets {
            set.write_csv(std::path::Path::new(&dir).join(format!("{name}.csv")))?;
        }
    }
    Ok(())
}
