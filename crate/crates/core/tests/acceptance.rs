//! Acceptance criteria, one PASS/FAIL/SKIP line each. Exits non-zero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use proposal_flow::benchmark::{
    ground_truth_flow, read_keypoints, write_keypoints, GroundTruth, Keypoint,
};
use proposal_flow::geometry::median_objective;
use proposal_flow::imageio::{decode_flo, encode_flo};
use proposal_flow::matching::phm_posteriors;
use proposal_flow::pipeline::{run_bench, RunConfig};
use proposal_flow::prelude::*;
use proposal_flow::synthetic::{clutter_pair, translated_pair, Texture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::*;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- 1

fn grid_oracle(pts: &[Offset]) -> f64 {
    const N: usize = 100;
    let a: Vec<[f64; 3]> = pts.iter().map(|p| p.to_array()).collect();
    let lo: [f64; 3] = std::array::from_fn(|k| a.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min));
    let hi: [f64; 3] = std::array::from_fn(|k| a.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max));
    let step: [f64; 3] = std::array::from_fn(|k| (hi[k] - lo[k]) / (N - 1) as f64);
    let f = |x: [f64; 3]| -> f64 {
        a.iter()
            .map(|p| ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2) + (x[2] - p[2]).powi(2)).sqrt())
            .sum()
    };
    let (best, arg) = (0..N)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, [0.0; 3]);
            for j in 0..N {
                for k in 0..N {
                    let x = [
                        lo[0] + i as f64 * step[0],
                        lo[1] + j as f64 * step[1],
                        lo[2] + k as f64 * step[2],
                    ];
                    let v = f(x);
                    if v < best.0 {
                        best = (v, x);
                    }
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, [0.0; 3]), |a, b| if b.0 < a.0 { b } else { a });
    // compass search from the best grid node
    let (mut x, mut fx) = (arg, best);
    let mut h = step.iter().cloned().fold(0.0, f64::max).max(1e-3);
    while h > 1e-12 {
        let mut moved = false;
        for k in 0..3 {
            for s in [-1.0, 1.0] {
                let mut y = x;
                y[k] += s * h;
                let fy = f(y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    fx
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances: Vec<Vec<Offset>> = (0..200)
        .map(|_| {
            let n = rng.random_range(3..=8);
            (0..n)
                .map(|_| {
                    Offset::new(
                        rng.random_range(-50.0..50.0),
                        rng.random_range(-50.0..50.0),
                        rng.random_range(-3.0..3.0),
                    )
                })
                .collect()
        })
        .collect();
    let t0 = Instant::now();
    let medians: Vec<Offset> = instances.iter().map(|p| geometric_median(p)).collect();
    let weiszfeld = t0.elapsed().as_secs_f64();
    let mut worst = f64::NEG_INFINITY;
    for (pts, m) in instances.iter().zip(&medians) {
        worst = worst.max(median_objective(m, pts) - grid_oracle(pts));
    }
    let total = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-6 && total < 5.0,
        format!(
            "max(objective - grid optimum) = {worst:.3e} (tol 1e-6) over 200 instances; \
             weiszfeld {weiszfeld:.4} s, total with oracle {total:.2} s (limit 5 s)"
        ),
    )
}

// ---------------------------------------------------------------- 2 and 3

/// Exact PHM posteriors by the defining double sums, written from scratch.
fn naive_phm(src: &[BBox], dst: &[BBox], a: &AppearanceMatrix, sxy: f64, ss: f64) -> Vec<f64> {
    let gamma = |b: &BBox| {
        let area = (b.x_max - b.x_min) * (b.y_max - b.y_min);
        [(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0, area.sqrt().log2()]
    };
    let mut offsets = Vec::new();
    for s in src {
        for d in dst {
            let (gs, gd) = (gamma(s), gamma(d));
            offsets.push([gs[0] - gd[0], gs[1] - gd[1], gs[2] - gd[2]]);
        }
    }
    let k = |p: &[f64; 3], q: &[f64; 3]| {
        let e = ((p[0] - q[0]) / sxy).powi(2) + ((p[1] - q[1]) / sxy).powi(2) + ((p[2] - q[2]) / ss).powi(2);
        (-0.5 * e).exp()
    };
    let m = dst.len();
    let mut h = vec![0.0; offsets.len()];
    for p in 0..offsets.len() {
        for q in 0..offsets.len() {
            h[p] += a.get(q / m, q % m) * k(&offsets[q], &offsets[p]);
        }
    }
    let mut post = vec![0.0; offsets.len()];
    for p in 0..offsets.len() {
        let mut g = 0.0;
        for q in 0..offsets.len() {
            g += k(&offsets[p], &offsets[q]) * h[q];
        }
        post[p] = a.get(p / m, p % m) * g;
    }
    post
}

struct PhmInstance {
    src: ProposalSet,
    dst: ProposalSet,
    a: AppearanceMatrix,
    kernel: GaussianKernel,
}

fn phm_instances() -> Vec<PhmInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..50)
        .map(|_| {
            let (n, m) = (rng.random_range(2..=15), rng.random_range(2..=15));
            let src = random_set(&mut rng, n, 120, 90);
            let dst = random_set(&mut rng, m, 120, 90);
            let a = random_matrix(&mut rng, n, m);
            PhmInstance {
                src,
                dst,
                a,
                kernel: GaussianKernel::for_image(120, 90),
            }
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for inst in phm_instances() {
        let (s, d) = (inst.src.boxes(), inst.dst.boxes());
        let [sxy, _, ss] = inst.kernel.sigmas();
        let want = naive_phm(&s, &d, &inst.a, sxy, ss);
        let got = phm_posteriors(&inst.src, &inst.dst, &inst.a, &inst.kernel, PhmMode::Exact).unwrap();
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs() / w.abs().max(1e-300));
        }
    }
    verdict(worst <= 1e-9, format!("max relative error {worst:.3e} (tol 1e-9) over 50 instances"))
}

fn criterion_3() -> Outcome {
    let (mut agree, mut total) = (0usize, 0usize);
    for inst in phm_instances() {
        let exact = phm(&inst.src, &inst.dst, &inst.a, &inst.kernel, PhmMode::Exact).unwrap();
        let binned = phm(
            &inst.src,
            &inst.dst,
            &inst.a,
            &inst.kernel,
            PhmMode::Binned(HoughConfig::full_coverage([32, 32, 32])),
        )
        .unwrap();
        agree += exact
            .targets()
            .iter()
            .zip(binned.targets())
            .filter(|(a, b)| **a == *b)
            .count();
        total += exact.len();
    }
    let rate = agree as f64 / total as f64;
    verdict(
        rate >= 0.95,
        format!("top-1 agreement {agree}/{total} = {:.2}% (need >= 95%) with 32^3 bins", 100.0 * rate),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_epe = 0.0f64;
    for seed in 0..3u64 {
        let img = Texture::seeded(100 + seed).render(96, 80).unwrap();
        let kernel = GaussianKernel::for_image(96, 80);
        let small = sliding_window(96, 80, 44).unwrap();
        let large = sliding_window(96, 80, 400).unwrap();
        let runs: Vec<(&str, &ProposalSet, Matcher)> = vec![
            ("nam", &large, Matcher::Nam),
            ("phm-exact", &small, Matcher::Phm { kernel, mode: PhmMode::Exact }),
            ("lom", &large, Matcher::Lom { kernel }),
        ];
        for (name, set, matcher) in runs {
            let a = hog_appearance(&img, set, &img, set);
            let asg = matcher.run(set, set, &a).unwrap();
            let wrong = asg.targets().iter().enumerate().filter(|(i, t)| *i != **t).count();
            if wrong > 0 {
                failures.push(format!("seed {seed} {name}: {wrong} non-identity matches"));
            }
            let flow = densify(set, set, &asg, &img, FillMode::default()).unwrap();
            let epe = flow.mean_epe_valid(|_, _| [0.0, 0.0]).unwrap_or(f64::INFINITY);
            worst_epe = worst_epe.max(epe);
        }
    }
    let ok = failures.is_empty() && worst_epe < 0.5;
    let mut detail = format!("3 images x {{nam, phm-exact (n=44), lom}}; worst mean EPE {worst_epe:.2e} px (limit 0.5)");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    verdict(ok, detail)
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let (w, h) = (128usize, 112usize);
    let mut parts = Vec::new();
    let mut ok = true;
    for t in [[8usize, 0usize], [0, 8], [13, 7]] {
        let tf = [t[0] as f64, t[1] as f64];
        let (src, dst) = translated_pair(w, h, tf, 7).unwrap();
        let (rs, rd) = translatable_windows(w, h, t, 500);
        let a = hog_appearance(&src, &rs, &dst, &rd);
        let asg = lom(&rs, &rd, &a, &GaussianKernel::for_image(w, h)).unwrap();
        let flow = densify(&rs, &rd, &asg, &src, FillMode::default()).unwrap();
        let epe = flow.mean_epe_valid(|_, _| tf).unwrap_or(f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kps: Vec<[f64; 2]> = (0..12)
            .map(|_| {
                [
                    rng.random_range(0.0..(w - 1 - t[0]) as f64),
                    rng.random_range(0.0..(h - 1 - t[1]) as f64),
                ]
            })
            .collect();
        let moved: Vec<[f64; 2]> = kps.iter().map(|p| [p[0] + tf[0], p[1] + tf[1]]).collect();
        let dst_box = BBox::new(tf[0], tf[1], w as f64, h as f64).unwrap();
        let score = pck(&flow, &kps, &moved, &dst_box, 0.1).unwrap();
        ok &= epe < 1.0 && score == 1.0;
        parts.push(format!("t=({},{}) EPE {epe:.2e} PCK {score}", t[0], t[1]));
    }
    verdict(ok, format!("{} (limits EPE < 1, PCK = 1)", parts.join(", ")))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut residual = 0.0f64;
    let mut affine_w = 0.0f64;
    let mut min_pck = 1.0f64;
    for _ in 0..50 {
        let m = rng.random_range(3..=20);
        let src: Vec<[f64; 2]> = (0..m)
            .map(|_| [rng.random_range(5.0..95.0), rng.random_range(5.0..95.0)])
            .collect();
        let dst: Vec<[f64; 2]> = src
            .iter()
            .map(|p| [p[0] + rng.random_range(-6.0..6.0), p[1] + rng.random_range(-6.0..6.0)])
            .collect();
        let Ok(tps) = TpsMap::fit(&src, &dst, 0.0) else {
            continue;
        };
        for (p, q) in src.iter().zip(&dst) {
            let r = tps.apply(*p);
            residual = residual.max(((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2)).sqrt());
        }
        let c: [f64; 6] = std::array::from_fn(|i| if i % 3 == 2 { rng.random_range(-10.0..10.0) } else { rng.random_range(-0.3..0.3) + if i == 0 || i == 4 { 1.0 } else { 0.0 } });
        let aff: Vec<[f64; 2]> = src
            .iter()
            .map(|p| [c[0] * p[0] + c[1] * p[1] + c[2], c[3] * p[0] + c[4] * p[1] + c[5]])
            .collect();
        if let Ok(t) = TpsMap::fit(&src, &aff, 0.0) {
            affine_w = affine_w.max(t.max_kernel_weight());
        }
        let flow = ground_truth_flow(&tps, 100, 100);
        let b = BBox::bounding(&dst).unwrap();
        min_pck = min_pck.min(pck(&flow, &src, &dst, &b, 0.05).unwrap());
    }
    verdict(
        residual < 1e-6 && affine_w < 1e-6 && min_pck == 1.0,
        format!(
            "50 instances: max control residual {residual:.2e} px (tol 1e-6), \
             max affine kernel weight {affine_w:.2e} (tol 1e-6), min PCK@0.05 on TPS flow {min_pck}"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut iou_bad = 0;
    for _ in 0..10_000 {
        let a = random_box(&mut rng, 100.0, 100.0);
        let b = random_box(&mut rng, 100.0, 100.0);
        let (ab, ba) = (iou(&a, &b), iou(&b, &a));
        if ab != ba || !(0.0..=1.0).contains(&ab) || (iou(&a, &a) - 1.0).abs() > 1e-12 {
            iou_bad += 1;
        }
    }
    let taus = tau_grid(101);
    let (mut monotone_bad, mut dominance_bad) = (0, 0);
    for _ in 0..100 {
        let rs = random_set(&mut rng, 20, 100, 100);
        let rd = random_set(&mut rng, 25, 100, 100);
        let members: Vec<usize> = (0..20).filter(|_| rng.random_bool(0.6)).collect();
        if members.is_empty() {
            continue;
        }
        let gt = GroundTruth {
            boxes: members.iter().map(|_| random_box(&mut rng, 100.0, 100.0)).collect(),
            members,
            tps: TpsMap::identity(),
        };
        let a = random_matrix(&mut rng, rs.len(), rd.len());
        let asg = nam(&rs, &rd, &a).unwrap();
        let pcr = pcr_curve(&asg, &rd, &gt, &taus).unwrap();
        let ub = upper_bound_curve(&rd, &gt, &taus).unwrap();
        if pcr.y.windows(2).any(|w| w[1] < w[0]) {
            monotone_bad += 1;
        }
        if ub.y.iter().zip(&pcr.y).any(|(u, p)| u < p) {
            dominance_bad += 1;
        }
    }
    verdict(
        iou_bad + monotone_bad + dominance_bad == 0,
        format!(
            "IoU violations {iou_bad}/10000, non-monotone PCR {monotone_bad}/100, \
             upper-bound dominance violations {dominance_bad}/100"
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let (w, h) = (128usize, 128usize);
    let taus = tau_grid(101);
    let rows: Vec<[f64; 6]> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let pair = clutter_pair(w, h, 800 + seed).unwrap();
            let rs = sliding_window(w, h, 500).unwrap();
            let rd = rs.clone();
            let a = hog_appearance(&pair.src.image, &rs, &pair.dst.image, &rd);
            let kernel = GaussianKernel::for_image(w, h);
            let gt = ground_truth(&rs, &pair.src, &pair.dst).unwrap();
            let mut out = [0.0; 6];
            for (k, m) in [Matcher::Nam, Matcher::Phm { kernel, mode: PhmMode::default() }, Matcher::Lom { kernel }]
                .iter()
                .enumerate()
            {
                let asg = m.run(&rs, &rd, &a).unwrap();
                out[k] = pcr_curve(&asg, &rd, &gt, &taus).unwrap().auc;
                out[3 + k] = miou_at_k(&asg, &rd, &gt).auc;
            }
            out
        })
        .collect();
    let mean: [f64; 6] = std::array::from_fn(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64);
    let ok = mean[2] >= mean[1] && mean[2] >= mean[0] && mean[5] >= mean[3];
    verdict(
        ok,
        format!(
            "20 pairs, mean PCR AuC nam {:.4} phm {:.4} lom {:.4}; mean mIoU@k AuC nam {:.4} phm {:.4} lom {:.4}",
            mean[0], mean[1], mean[2], mean[3], mean[4], mean[5]
        ),
    )
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let Some(manifest) = std::env::var_os("PROPOSALFLOW_DATASET_MANIFEST") else {
        return Outcome::Skip(
            "dataset not present (set PROPOSALFLOW_DATASET_MANIFEST to a pair manifest)".into(),
        );
    };
    let dir = tempfile::tempdir().unwrap();
    let mut means = BTreeMap::new();
    for strategy in ["nam", "lom"] {
        let mut cfg = RunConfig::default();
        cfg.set("strategy", strategy).unwrap();
        let rows = match run_bench(&cfg, &manifest, dir.path().join(strategy)) {
            Ok(r) => r,
            Err(e) => return Outcome::Fail(format!("bench failed: {e}")),
        };
        let mean = rows.iter().filter_map(|r| r.pck).sum::<f64>() / rows.len() as f64;
        means.insert(strategy, mean);
    }
    verdict(
        means["lom"] > means["nam"],
        format!("mean PCK@0.1 with SW proposals: lom {:.4}, nam {:.4}", means["lom"], means["nam"]),
    )
}

// ---------------------------------------------------------------- 10

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let mut problems = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dir = tempfile::tempdir().unwrap();

    let mut flow = FlowField::new(37, 23);
    for i in 0..flow.len() {
        flow.u[i] = f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff);
        flow.v[i] = rng.random_range(-1e6f32..1e6);
        flow.valid[i] = rng.random_bool(0.7);
        flow.score[i] = if flow.valid[i] { rng.random_range(0.0..1.0) } else { 0.0 };
    }
    let bytes = encode_flo(&flow);
    let back = decode_flo(&bytes).unwrap();
    if encode_flo(&back) != bytes || back.u.iter().zip(&flow.u).any(|(a, b)| a.to_bits() != b.to_bits()) {
        problems.push("flo bytes".to_string());
    }
    let flo_path = dir.path().join("f.flo");
    write_flo(&flow, &flo_path).unwrap();
    if read_flo(&flo_path).unwrap() != flow {
        problems.push("flo file + meta".to_string());
    }

    let props = uniform_sample(90, 70, 60, 3).unwrap();
    let pp = dir.path().join("props.csv");
    props.write_csv(&pp).unwrap();
    let imported = import_proposals(&pp, 90, 70, 1000, None).unwrap();
    if imported.set != props || imported.rejected != 0 {
        problems.push("proposal csv".to_string());
    }
    let kps: Vec<Keypoint> = (0..9)
        .map(|i| Keypoint { id: i * 3, x: rng.random_range(0.0..90.0), y: rng.random_range(0.0..70.0) })
        .collect();
    let kp = dir.path().join("kp.csv");
    write_keypoints(&kps, &kp).unwrap();
    if read_keypoints(&kp).unwrap() != kps {
        problems.push("keypoint csv".to_string());
    }
    let a = random_matrix(&mut rng, props.len(), props.len());
    let asg = lom(&props, &props, &a, &GaussianKernel::for_image(90, 70)).unwrap();
    let mp = dir.path().join("m.csv");
    asg.write_csv(&mp).unwrap();
    if Assignment::read_csv(&mp, Strategy::Lom).unwrap() != asg {
        problems.push("match csv".to_string());
    }

    let data = dir.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let manifest = write_manifest(&data, 3);
    let mut snaps = Vec::new();
    for threads in [1, 2, 8] {
        let mut cfg = RunConfig::default();
        cfg.budget = 300;
        cfg.threads = Some(threads);
        let out = dir.path().join(format!("out{threads}"));
        run_bench(&cfg, &manifest, &out).unwrap();
        snaps.push(snapshot(&out));
    }
    let files = snaps[0].len();
    if snaps[1] != snaps[0] || snaps[2] != snaps[0] {
        problems.push("bench outputs differ across thread counts".to_string());
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("flo/proposal/keypoint/match round trips exact; {files} bench files byte-identical for 1, 2, 8 threads")
        } else {
            format!("failed: {}", problems.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("geometric median vs grid oracle", criterion_1),
        ("exact PHM vs naive double loop", criterion_2),
        ("binned vs exact PHM agreement", criterion_3),
        ("identity pair", criterion_4),
        ("synthetic translation", criterion_5),
        ("thin-plate spline", criterion_6),
        ("metric properties", criterion_7),
        ("clutter ordering", criterion_8),
        ("dataset ordering", criterion_9),
        ("round trips and determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("acceptance {:>2} [{tag}] {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria met");
}
