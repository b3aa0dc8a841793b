//! Felzenszwalb-style HOG: 18 contrast-sensitive and 9 contrast-insensitive
//! orientation channels plus 4 gradient-energy channels per cell.

use std::f64::consts::PI;

use super::{Descriptor, DescriptorKind};
use crate::imageio::Image;

pub const HOG_CELL: usize = 8;
pub const HOG_FEATURES_PER_CELL: usize = 31;

const SENSITIVE: usize = 18;
const INSENSITIVE: usize = 9;
const CLIP: f64 = 0.2;
const EPS: f64 = 1e-4;
/// Scale applied to the energy channels (1 / sqrt(18)).
const ENERGY_SCALE: f64 = 0.2357;

/// HOG descriptor of a single-channel patch whose sides are multiples of 8.
///
/// Gradients use central differences with clamped borders; each pixel votes
/// its magnitude into the best of 18 signed orientations and is spread over
/// the four nearest cells bilinearly. Every cell is normalized by the energy
/// of the four 2x2 cell blocks containing it (border cells reuse their edge
/// neighbors) and truncated at 0.2. The flattened vector is L2-normalized
/// unless it is exactly zero (flat patch).
pub fn hog_descriptor(patch: &Image) -> Descriptor {
    let (w, h) = patch.dims();
    assert!(
        w % HOG_CELL == 0 && h % HOG_CELL == 0 && w > 0 && h > 0,
        "patch {w}x{h} is not a multiple of the {HOG_CELL} px cell"
    );
    let (cw, ch) = (w / HOG_CELL, h / HOG_CELL);
    let directions: Vec<(f64, f64)> = (0..INSENSITIVE)
        .map(|o| {
            let a = o as f64 * PI / INSENSITIVE as f64;
            (a.cos(), a.sin())
        })
        .collect();

    let luma = |x: usize, y: usize| patch.luma_at(x, y);
    let mut hist = vec![0.0f64; cw * ch * SENSITIVE];
    let cell = HOG_CELL as f64;
    for y in 0..h {
        for x in 0..w {
            let dx = luma((x + 1).min(w - 1), y) - luma(x.saturating_sub(1), y);
            let dy = luma(x, (y + 1).min(h - 1)) - luma(x, y.saturating_sub(1));
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut best = 0.0;
            let mut bin = 0;
            for (o, &(c, s)) in directions.iter().enumerate() {
                let dot = c * dx + s * dy;
                if dot > best {
                    best = dot;
                    bin = o;
                } else if -dot > best {
                    best = -dot;
                    bin = o + INSENSITIVE;
                }
            }

            let xp = (x as f64 + 0.5) / cell - 0.5;
            let yp = (y as f64 + 0.5) / cell - 0.5;
            let ixp = xp.floor();
            let iyp = yp.floor();
            let vx0 = xp - ixp;
            let vy0 = yp - iyp;
            let (ixp, iyp) = (ixp as isize, iyp as isize);
            for (cx, wx) in [(ixp, 1.0 - vx0), (ixp + 1, vx0)] {
                for (cy, wy) in [(iyp, 1.0 - vy0), (iyp + 1, vy0)] {
                    if cx < 0 || cy < 0 || cx >= cw as isize || cy >= ch as isize {
                        continue;
                    }
                    let c = cy as usize * cw + cx as usize;
                    hist[c * SENSITIVE + bin] += wx * wy * mag;
                }
            }
        }
    }

    let energy: Vec<f64> = hist
        .chunks_exact(SENSITIVE)
        .map(|hc| {
            (0..INSENSITIVE)
                .map(|o| (hc[o] + hc[o + INSENSITIVE]).powi(2))
                .sum()
        })
        .collect();
    let energy_at = |cx: isize, cy: isize| {
        let cx = cx.clamp(0, cw as isize - 1) as usize;
        let cy = cy.clamp(0, ch as isize - 1) as usize;
        energy[cy * cw + cx]
    };

    let mut values = Vec::with_capacity(cw * ch * HOG_FEATURES_PER_CELL);
    for cy in 0..ch as isize {
        for cx in 0..cw as isize {
            // the four 2x2 blocks containing this cell
            let norms: Vec<f64> = [(0, 0), (-1, 0), (0, -1), (-1, -1)]
                .iter()
                .map(|&(ox, oy)| {
                    let (bx, by) = (cx + ox, cy + oy);
                    let e = energy_at(bx, by)
                        + energy_at(bx + 1, by)
                        + energy_at(bx, by + 1)
                        + energy_at(bx + 1, by + 1);
                    1.0 / (e + EPS).sqrt()
                })
                .collect();
            let hc = &hist[(cy as usize * cw + cx as usize) * SENSITIVE..][..SENSITIVE];

            let mut texture = [0.0; 4];
            for &v in hc {
                let mut sum = 0.0;
                for (t, n) in texture.iter_mut().zip(&norms) {
                    let clipped = (v * n).min(CLIP);
                    sum += clipped;
                    *t += clipped;
                }
                values.push(0.5 * sum);
            }
            for o in 0..INSENSITIVE {
                let v = hc[o] + hc[o + INSENSITIVE];
                values.push(0.5 * norms.iter().map(|n| (v * n).min(CLIP)).sum::<f64>());
            }
            values.extend(texture.iter().map(|t| ENERGY_SCALE * t));
        }
    }

    let mut d = Descriptor {
        kind: DescriptorKind::Hog,
        values,
    };
    d.normalize();
    d
}
