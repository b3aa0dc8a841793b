#![allow(dead_code)]

use std::path::{Path, PathBuf};

use proposal_flow::benchmark::{write_bbox, write_keypoints};
use proposal_flow::prelude::*;
use proposal_flow::synthetic::clutter_pair;
use rand::Rng;

pub fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
    BBox::new(x0, y0, x1, y1).unwrap()
}

pub fn random_box(rng: &mut impl Rng, w: f64, h: f64) -> BBox {
    let bw = rng.random_range(4.0..w * 0.6);
    let bh = rng.random_range(4.0..h * 0.6);
    let x = rng.random_range(0.0..w - bw);
    let y = rng.random_range(0.0..h - bh);
    bx(x, y, x + bw, y + bh)
}

pub fn random_set(rng: &mut impl Rng, n: usize, w: usize, h: usize) -> ProposalSet {
    let boxes: Vec<BBox> = (0..n)
        .map(|_| random_box(rng, w as f64, h as f64))
        .collect();
    ProposalSet::from_boxes(w, h, &boxes).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, m: usize) -> AppearanceMatrix {
    let data = (0..n * m).map(|_| rng.random_range(0.0..1.0)).collect();
    AppearanceMatrix::new(n, m, data).unwrap()
}

/// Whitened HOG appearance matrix of two proposal sets.
pub fn hog_appearance(src: &Image, rs: &ProposalSet, dst: &Image, rd: &ProposalSet) -> AppearanceMatrix {
    let fs = describe_proposals(src, rs, DEFAULT_PATCH_SIDE).unwrap();
    let fd = describe_proposals(dst, rd, DEFAULT_PATCH_SIDE).unwrap();
    let w = whiten(&[&fs, &fd]).unwrap();
    appearance_matrix(&w[0], &w[1]).unwrap()
}

/// Sliding windows over the top-left `(w - tx) x (h - ty)` region, so that
/// the set translated by `t` stays inside a `w x h` image.
pub fn translatable_windows(w: usize, h: usize, t: [usize; 2], limit: usize) -> (ProposalSet, ProposalSet) {
    let inner = sliding_window(w - t[0], h - t[1], limit).unwrap();
    let src = ProposalSet::from_boxes(w, h, &inner.boxes()).unwrap();
    let moved: Vec<BBox> = inner
        .boxes()
        .iter()
        .map(|b| b.translate(t[0] as f64, t[1] as f64))
        .collect();
    (src, ProposalSet::from_boxes(w, h, &moved).unwrap())
}

/// Writes `pairs` synthetic clutter pairs and their manifest into `dir`.
pub fn write_manifest(dir: &Path, pairs: usize) -> PathBuf {
    let mut text = String::from("pair_id,src_image,dst_image,src_kp,dst_kp,src_bb,dst_bb\n");
    for i in 0..pairs {
        let p = clutter_pair(80, 72, 40 + i as u64).unwrap();
        let id = format!("p{i}");
        for (side, ann) in [("src", &p.src), ("dst", &p.dst)] {
            save_image(&ann.image, dir.join(format!("{id}_{side}.pgm"))).unwrap();
            write_keypoints(&ann.keypoints, dir.join(format!("{id}_{side}_kp.csv"))).unwrap();
            write_bbox(&ann.bbox, dir.join(format!("{id}_{side}_bb.txt"))).unwrap();
        }
        text.push_str(&format!(
            "{id},{id}_src.pgm,{id}_dst.pgm,{id}_src_kp.csv,{id}_dst_kp.csv,{id}_src_bb.txt,{id}_dst_bb.txt\n"
        ));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, text).unwrap();
    path
}
