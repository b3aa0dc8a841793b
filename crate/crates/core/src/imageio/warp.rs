use std::collections::VecDeque;

use super::{FlowField, Image};
use crate::error::{Error, Result};

/// What `warp_backward` writes at pixels whose flow is flagged invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InvalidPixels {
    /// Sample with the stored flow anyway (right after hole filling).
    #[default]
    UseFlow,
    /// Copy the warped value of the nearest valid pixel.
    NearestValid,
    Black,
}

/// `out(p) = target(p + flow(p))`, sampled bilinearly with border clamping.
/// The output has the flow's dimensions and the target's channel count.
pub fn warp_backward(target: &Image, flow: &FlowField, invalid: InvalidPixels) -> Result<Image> {
    flow.check()?;
    if flow.is_empty() {
        return Err(Error::DimensionMismatch("empty flow field".into()));
    }
    let (w, h, ch) = (flow.width, flow.height, target.channels());
    let mut data = vec![0.0; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            let i = flow.index(x, y);
            if !flow.valid[i] && invalid != InvalidPixels::UseFlow {
                continue;
            }
            let sx = x as f64 + flow.u[i] as f64;
            let sy = y as f64 + flow.v[i] as f64;
            for c in 0..ch {
                data[i * ch + c] = target.sample(sx, sy, c);
            }
        }
    }
    if invalid == InvalidPixels::NearestValid {
        if let Some(source) = nearest_valid(flow) {
            for (i, &s) in source.iter().enumerate() {
                if s != i {
                    for c in 0..ch {
                        data[i * ch + c] = data[s * ch + c];
                    }
                }
            }
        }
    }
    Image::new(w, h, ch, data)
}

/// For every pixel, the index of a nearest valid pixel by 8-connected BFS,
/// seeded in row-major order. `None` when no pixel is valid.
pub(crate) fn nearest_valid(flow: &FlowField) -> Option<Vec<usize>> {
    let (w, h) = (flow.width, flow.height);
    let mut source = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    for (i, &v) in flow.valid.iter().enumerate() {
        if v {
            source[i] = i;
            queue.push_back(i);
        }
    }
    if queue.is_empty() {
        return None;
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if source[j] == usize::MAX {
                    source[j] = source[i];
                    queue.push_back(j);
                }
            }
        }
    }
    Some(source)
}
