//! Library results checked against small independent re-derivations.

mod common;

use proposal_flow::benchmark::{Keypoint, GroundTruth};
use proposal_flow::flowfield::{densify_with_anchors, JointBilateral};
use proposal_flow::geometry::median_objective;
use proposal_flow::matching::{local_offsets, lom, Assignment, RegionMatch, Strategy};
use proposal_flow::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn gamma(b: &BBox) -> [f64; 3] {
    let w = b.x_max - b.x_min;
    let h = b.y_max - b.y_min;
    [(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0, (w * h).sqrt().log2()]
}

fn shares_area(a: &BBox, b: &BBox) -> bool {
    a.x_min.max(b.x_min) < a.x_max.min(b.x_max) && a.y_min.max(b.y_min) < a.y_max.min(b.y_max)
}

fn best_col(a: &AppearanceMatrix, i: usize) -> usize {
    let mut best = 0;
    for j in 1..a.cols() {
        if a.get(i, j) > a.get(i, best) {
            best = j;
        }
    }
    best
}

fn neighbor_offsets(src: &ProposalSet, dst: &ProposalSet, a: &AppearanceMatrix, i: usize) -> Vec<Offset> {
    (0..src.len())
        .filter(|&k| shares_area(&src.get(i).bbox, &src.get(k).bbox))
        .map(|k| {
            let s = gamma(&src.get(k).bbox);
            let d = gamma(&dst.get(best_col(a, k)).bbox);
            Offset::new(s[0] - d[0], s[1] - d[1], s[2] - d[2])
        })
        .collect()
}

fn plain_weiszfeld(pts: &[Offset]) -> Offset {
    let n = pts.len() as f64;
    let mut x = [0.0; 3];
    for p in pts {
        for (xk, pk) in x.iter_mut().zip(p.to_array()) {
            *xk += pk / n;
        }
    }
    for _ in 0..20_000 {
        let (mut num, mut den) = ([0.0; 3], 0.0);
        for p in pts {
            let p = p.to_array();
            let d = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2) + (x[2] - p[2]).powi(2)).sqrt().max(1e-12);
            for k in 0..3 {
                num[k] += p[k] / d;
            }
            den += 1.0 / d;
        }
        x = [num[0] / den, num[1] / den, num[2] / den];
    }
    Offset::from_array(x)
}

#[test]
fn local_offsets_minimize_the_neighbor_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let src = random_set(&mut rng, 25, 120, 90);
        let dst = random_set(&mut rng, 20, 120, 90);
        let a = random_matrix(&mut rng, 25, 20);
        let field = local_offsets(&src, &dst, &a).unwrap();
        for i in 0..src.len() {
            let pts = neighbor_offsets(&src, &dst, &a, i);
            assert_eq!(field.neighbor_counts[i], pts.len());
            let got = median_objective(&field.offsets[i], &pts);
            let reference = median_objective(&plain_weiszfeld(&pts), &pts);
            assert!(got <= reference + 1e-9, "region {i}: {got} > {reference}");
            for p in &pts {
                assert!(got <= median_objective(p, &pts) + 1e-12);
            }
        }
    }
}

#[test]
fn lom_posterior_matches_its_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let kernel = GaussianKernel::new(12.0, 0.5);
    for _ in 0..10 {
        let src = random_set(&mut rng, 30, 120, 90);
        let dst = random_set(&mut rng, 25, 120, 90);
        let a = random_matrix(&mut rng, 30, 25);
        let field = local_offsets(&src, &dst, &a).unwrap();
        let asg = lom(&src, &dst, &a, &kernel).unwrap();
        for i in 0..src.len() {
            let support: f64 = (0..src.len())
                .filter(|&k| shares_area(&src.get(i).bbox, &src.get(k).bbox))
                .map(|k| a.get(k, best_col(&a, k)))
                .sum();
            let x = field.offsets[i];
            let post = |j: usize| {
                let s = gamma(&src.get(i).bbox);
                let d = gamma(&dst.get(j).bbox);
                let r = [s[0] - d[0] - x.dx, s[1] - d[1] - x.dy, s[2] - d[2] - x.dsc];
                let m = (r[0] / 12.0).powi(2) + (r[1] / 12.0).powi(2) + (r[2] / 0.5).powi(2);
                a.get(i, j) * (-0.5 * m).exp() * support
            };
            let best = (0..dst.len()).map(post).fold(f64::NEG_INFINITY, f64::max);
            let m = asg.matches()[i];
            assert!((m.posterior - best).abs() <= 1e-9 * best.max(1.0), "region {i}");
            assert!((post(m.tgt) - best).abs() <= 1e-9 * best.max(1.0));
        }
    }
}

#[test]
fn local_offsets_follow_a_translated_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let src = random_set(&mut rng, 30, 200, 200);
    let inner = random_set(&mut rng, 25, 150, 150);
    let dst = ProposalSet::from_boxes(200, 200, &inner.boxes()).unwrap();
    let moved: Vec<BBox> = inner.boxes().iter().map(|b| b.translate(31.0, 17.5)).collect();
    let moved = ProposalSet::from_boxes(200, 200, &moved).unwrap();
    let a = random_matrix(&mut rng, 30, 25);
    let before = local_offsets(&src, &dst, &a).unwrap();
    let after = local_offsets(&src, &moved, &a).unwrap();
    for (b, t) in before.offsets.iter().zip(&after.offsets) {
        assert!((b.dx - 31.0 - t.dx).abs() < 1e-6);
        assert!((b.dy - 17.5 - t.dy).abs() < 1e-6);
        assert!((b.dsc - t.dsc).abs() < 1e-6);
    }
}

fn random_assignment(rng: &mut impl Rng, n: usize, m: usize) -> Assignment {
    let matches = (0..n)
        .map(|i| {
            // coarse posteriors so that ties occur
            let post = rng.random_range(0..5) as f64 / 4.0;
            RegionMatch {
                src: i,
                tgt: rng.random_range(0..m),
                posterior: post,
                appearance: post,
                geometric: 1.0,
            }
        })
        .collect();
    Assignment::new(Strategy::Nam, matches)
}

#[test]
fn densify_respects_anchors_transfer_and_collisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (w, h) = (60, 45);
    let guide = proposal_flow::synthetic::Texture::seeded(3).render(w, h).unwrap();
    for _ in 0..8 {
        let src = random_set(&mut rng, 12, w, h);
        let dst = random_set(&mut rng, 10, w, h);
        let asg = random_assignment(&mut rng, 12, 10);
        let (flow, anchors) = densify_with_anchors(&src, &dst, &asg, &guide, FillMode::None).unwrap();
        let mut claimed = std::collections::HashMap::new();
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64, y as f64);
                let mut expected: Option<usize> = None;
                for p in src.iter() {
                    let b = p.bbox;
                    let inside = b.x_min <= px && px <= b.x_max && b.y_min <= py && py <= b.y_max;
                    if inside && expected.is_none_or(|e| asg.posterior(p.id) > asg.posterior(e)) {
                        expected = Some(p.id);
                    }
                }
                assert_eq!(anchors.get(x, y), expected);
                let i = flow.index(x, y);
                let Some(r) = expected else {
                    assert!(!flow.valid[i]);
                    continue;
                };
                if !flow.valid[i] {
                    continue;
                }
                let (s, d) = (src.get(r).bbox, dst.get(asg.target(r)).bbox);
                let qx = d.x_min + (px - s.x_min) / (s.x_max - s.x_min) * (d.x_max - d.x_min);
                let qy = d.y_min + (py - s.y_min) / (s.y_max - s.y_min) * (d.y_max - d.y_min);
                assert!((px + flow.u[i] as f64 - qx).abs() < 1e-3);
                assert!((py + flow.v[i] as f64 - qy).abs() < 1e-3);
                assert_eq!(flow.score[i], asg.posterior(r));
                let key = (qx.round() as i64, qy.round() as i64);
                assert!(claimed.insert(key, i).is_none(), "two valid pixels land on {key:?}");
            }
        }

        let (filled, _) = densify_with_anchors(
            &src,
            &dst,
            &asg,
            &guide,
            FillMode::JointBilateral(JointBilateral::default()),
        )
        .unwrap();
        assert_eq!(filled.valid, flow.valid);
        for i in 0..flow.len() {
            if flow.valid[i] {
                assert_eq!((filled.u[i], filled.v[i], filled.score[i]), (flow.u[i], flow.v[i], flow.score[i]));
            } else {
                assert!(filled.u[i].is_finite() && filled.v[i].is_finite());
                assert_eq!(filled.score[i], 0.0);
            }
        }
    }
}

fn annotated(size: usize, b: BBox, pts: &[[f64; 2]]) -> AnnotatedImage {
    let kps = pts
        .iter()
        .enumerate()
        .map(|(i, p)| Keypoint { id: i as u32, x: p[0], y: p[1] })
        .collect();
    AnnotatedImage::new(Image::filled(size, size, 1, 0.5).unwrap(), b, kps).unwrap()
}

#[test]
fn ground_truth_boxes_follow_an_affine_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let object = bx(20.0, 30.0, 120.0, 110.0);
    let pts: Vec<[f64; 2]> = (0..9)
        .map(|_| [rng.random_range(20.0..120.0), rng.random_range(30.0..110.0)])
        .collect();
    let boxes: Vec<BBox> = (0..40).map(|_| random_box(&mut rng, 140.0, 130.0)).collect();
    let set = ProposalSet::from_boxes(200, 200, &boxes).unwrap();
    let src = annotated(200, object, &pts);
    let motion = |p: [f64; 2]| [0.8 * p[0] + 35.0, 0.8 * p[1] + 12.0];
    let moved: Vec<[f64; 2]> = pts.iter().map(|&p| motion(p)).collect();
    let [x0, y0] = motion([object.x_min, object.y_min]);
    let [x1, y1] = motion([object.x_max, object.y_max]);
    let dst = annotated(200, bx(x0, y0, x1, y1), &moved);

    let gt = ground_truth(&set, &src, &dst).unwrap();
    let expected: Vec<usize> = (0..set.len())
        .filter(|&i| {
            let b = set.get(i).bbox;
            let inter = (b.x_max.min(object.x_max) - b.x_min.max(object.x_min)).max(0.0)
                * (b.y_max.min(object.y_max) - b.y_min.max(object.y_min)).max(0.0);
            inter / b.area() >= 0.75
        })
        .collect();
    assert!(!expected.is_empty());
    assert_eq!(gt.members, expected);
    for (&m, g) in gt.members.iter().zip(&gt.boxes) {
        let b = set.get(m).bbox;
        let [ex0, ey0] = motion([b.x_min, b.y_min]);
        let [ex1, ey1] = motion([b.x_max, b.y_max]);
        for (got, want) in [(g.x_min, ex0), (g.y_min, ey0), (g.x_max, ex1), (g.y_max, ey1)] {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }
}

#[test]
fn pck_grows_with_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let (w, h) = (50, 40);
    let mut flow = FlowField::constant(w, h, 0.0, 0.0);
    for i in 0..flow.len() {
        flow.u[i] = rng.random_range(-6.0..6.0);
        flow.v[i] = rng.random_range(-6.0..6.0);
    }
    let src: Vec<[f64; 2]> = (0..30)
        .map(|_| [rng.random_range(0.0..49.0), rng.random_range(0.0..39.0)])
        .collect();
    let dst: Vec<[f64; 2]> = src.iter().map(|p| [p[0] + 2.0, p[1] - 1.0]).collect();
    let object = bx(0.0, 0.0, 40.0, 30.0);
    let mut last = 0.0;
    for k in 1..=20 {
        let v = pck(&flow, &src, &dst, &object, k as f64 * 0.05).unwrap();
        assert!(v >= last);
        last = v;
    }
    assert_eq!(last, 1.0);
}

fn three_member_truth() -> (Assignment, ProposalSet, GroundTruth) {
    let stars = vec![bx(0.0, 0.0, 10.0, 10.0), bx(20.0, 0.0, 30.0, 10.0), bx(40.0, 0.0, 50.0, 10.0)];
    // IoU 1, 0.5 and 0 with the truth boxes
    let dst = ProposalSet::from_boxes(
        100,
        100,
        &[bx(0.0, 0.0, 10.0, 10.0), bx(20.0, 0.0, 30.0, 5.0), bx(60.0, 60.0, 70.0, 70.0)],
    )
    .unwrap();
    let matches = [0.2, 0.9, 0.5]
        .iter()
        .enumerate()
        .map(|(i, &p)| RegionMatch { src: i, tgt: i, posterior: p, appearance: p, geometric: 1.0 })
        .collect();
    let gt = GroundTruth { members: vec![0, 1, 2], boxes: stars, tps: TpsMap::identity() };
    (Assignment::new(Strategy::Nam, matches), dst, gt)
}

#[test]
fn pcr_curve_by_hand() {
    let (asg, dst, gt) = three_member_truth();
    let curve = pcr_curve(&asg, &dst, &gt, &tau_grid(101)).unwrap();
    assert_eq!(curve.y[0], 0.0);
    assert!((curve.y[50] - 1.0 / 3.0).abs() < 1e-12);
    assert!((curve.y[51] - 2.0 / 3.0).abs() < 1e-12);
    assert!((curve.y[100] - 2.0 / 3.0).abs() < 1e-12);
    // trapezoid: 0->1/3 ramp, 49 steps at 1/3, 1/3->2/3 ramp, 49 steps at 2/3
    let auc = 0.01 * (1.0 / 6.0 + 49.0 / 3.0 + 0.5 + 98.0 / 3.0);
    assert!((curve.auc - auc).abs() < 1e-12);
}

#[test]
fn miou_curve_by_hand() {
    let (asg, dst, gt) = three_member_truth();
    let curve = miou_at_k(&asg, &dst, &gt);
    assert_eq!(curve.x, vec![1.0, 2.0, 3.0]);
    let want = [0.5, 0.25, 0.5];
    for (g, w) in curve.y.iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
    }
    assert!((curve.auc - 0.375).abs() < 1e-12);
}
