//! Procedural scenes with known correspondence: smooth random textures,
//! translated pairs, and object pairs under scale and translation over
//! independent cluttered backgrounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmark::{AnnotatedImage, Keypoint};
use crate::error::Result;
use crate::geometry::{BBox, Point};
use crate::imageio::Image;

#[derive(Debug, Clone, Copy)]
struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: f64,
}

/// Sum of random plane waves, rescaled to `[0, 1]`. Defined on the whole
/// plane, so shifted or scaled copies are exact.
#[derive(Debug, Clone)]
pub struct Texture {
    waves: Vec<Wave>,
    norm: f64,
}

impl Texture {
    /// `count` waves with periods drawn from `[min_period, max_period]` px.
    pub fn random(rng: &mut impl Rng, count: usize, min_period: f64, max_period: f64) -> Self {
        let waves: Vec<Wave> = (0..count)
            .map(|_| {
                let period = rng.random_range(min_period..=max_period);
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                let k = std::f64::consts::TAU / period;
                Wave {
                    kx: k * angle.cos(),
                    ky: k * angle.sin(),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                    amp: rng.random_range(0.5..1.0),
                }
            })
            .collect();
        let norm = waves.iter().map(|w| w.amp).sum::<f64>().max(1e-12);
        Texture { waves, norm }
    }

    pub fn seeded(seed: u64) -> Self {
        Texture::random(&mut ChaCha8Rng::seed_from_u64(seed), 12, 5.0, 40.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|w| w.amp * (w.kx * x + w.ky * y + w.phase).sin())
            .sum();
        0.5 + 0.5 * s / self.norm
    }

    pub fn render(&self, width: usize, height: usize) -> Result<Image> {
        Image::from_fn(width, height, |x, y| self.eval(x as f64, y as f64))
    }
}

/// `(src, dst)` with `dst(p) = src(p - t)`: content moves by `t`.
pub fn translated_pair(width: usize, height: usize, t: [f64; 2], seed: u64) -> Result<(Image, Image)> {
    let tex = Texture::seeded(seed);
    let src = tex.render(width, height)?;
    let dst = Image::from_fn(width, height, |x, y| tex.eval(x as f64 - t[0], y as f64 - t[1]))?;
    Ok((src, dst))
}

/// An object pair with a known similarity map `p' = scale * (p - origin) + target`.
#[derive(Debug, Clone)]
pub struct ScenePair {
    pub src: AnnotatedImage,
    pub dst: AnnotatedImage,
    pub scale: f64,
    pub origin: Point,
    pub target: Point,
}

impl ScenePair {
    pub fn map(&self, p: Point) -> Point {
        [
            self.target[0] + self.scale * (p[0] - self.origin[0]),
            self.target[1] + self.scale * (p[1] - self.origin[1]),
        ]
    }
}

struct Clutter {
    base: Texture,
    rects: Vec<(BBox, f64)>,
}

impl Clutter {
    fn random(rng: &mut impl Rng, width: f64, height: f64) -> Self {
        let base = Texture::random(rng, 8, 6.0, 30.0);
        let rects = (0..rng.random_range(12..20))
            .map(|_| {
                let w = rng.random_range(6.0..width / 3.0);
                let h = rng.random_range(6.0..height / 3.0);
                let x = rng.random_range(-w / 2.0..width - w / 2.0);
                let y = rng.random_range(-h / 2.0..height - h / 2.0);
                (BBox { x_min: x, y_min: y, x_max: x + w, y_max: y + h }, rng.random_range(0.0..1.0))
            })
            .collect();
        Clutter { base, rects }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let mut v = 0.6 * self.base.eval(x, y) + 0.2;
        for (r, shade) in &self.rects {
            if r.contains(x, y) {
                v = 0.7 * shade + 0.3 * v;
            }
        }
        v
    }
}

/// A textured square object placed over two different cluttered
/// backgrounds; in the target image the object is scaled by a factor in
/// `[0.8, 1.25]` and moved. Eight keypoints are spread over the object.
pub fn clutter_pair(width: usize, height: usize, seed: u64) -> Result<ScenePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let object = Texture::random(&mut rng, 14, 6.0, 24.0);
    let bg_src = Clutter::random(&mut rng, w, h);
    let bg_dst = Clutter::random(&mut rng, w, h);

    let side = rng.random_range(0.45..0.6) * w.min(h);
    let scale: f64 = rng.random_range(0.8..1.25);
    let dst_side = side * scale;
    let origin = [rng.random_range(0.0..w - side), rng.random_range(0.0..h - side)];
    let target = [
        rng.random_range(0.0..w - dst_side),
        rng.random_range(0.0..h - dst_side),
    ];
    let src_box = BBox::new(origin[0], origin[1], origin[0] + side, origin[1] + side)?;
    let dst_box = BBox::new(target[0], target[1], target[0] + dst_side, target[1] + dst_side)?;

    let render = |bg: &Clutter, b: &BBox, at: Point, s: f64| {
        Image::from_fn(width, height, |x, y| {
            let (x, y) = (x as f64, y as f64);
            if b.contains(x, y) {
                object.eval((x - at[0]) / s, (y - at[1]) / s)
            } else {
                bg.eval(x, y)
            }
        })
    };
    let src_img = render(&bg_src, &src_box, origin, 1.0)?;
    let dst_img = render(&bg_dst, &dst_box, target, scale)?;

    let pair_map = |p: Point| [target[0] + scale * (p[0] - origin[0]), target[1] + scale * (p[1] - origin[1])];
    let pts: Vec<Point> = (0..8)
        .map(|_| {
            [
                origin[0] + side * rng.random_range(0.1..0.9),
                origin[1] + side * rng.random_range(0.1..0.9),
            ]
        })
        .collect();
    let kps = |f: &dyn Fn(Point) -> Point| -> Vec<Keypoint> {
        pts.iter()
            .enumerate()
            .map(|(i, &p)| {
                let q = f(p);
                Keypoint { id: i as u32, x: q[0], y: q[1] }
            })
            .collect()
    };
    Ok(ScenePair {
        src: AnnotatedImage::new(src_img, src_box, kps(&|p| p))?,
        dst: AnnotatedImage::new(dst_img, dst_box, kps(&pair_map))?,
        scale,
        origin,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_range_and_determinism() {
        let a = Texture::seeded(4).render(40, 30).unwrap();
        let b = Texture::seeded(4).render(40, 30).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn translated_pair_is_exact_shift() {
        let (s, d) = translated_pair(40, 40, [5.0, 3.0], 1).unwrap();
        assert_eq!(s.get(10, 10, 0), d.get(15, 13, 0));
    }

    #[test]
    fn clutter_pair_keypoints_follow_map() {
        let p = clutter_pair(96, 96, 2).unwrap();
        for (a, b) in p.src.keypoints.iter().zip(&p.dst.keypoints) {
            let q = p.map([a.x, a.y]);
            assert!((q[0] - b.x).abs() < 1e-12 && (q[1] - b.y).abs() < 1e-12);
            assert!(p.src.bbox.contains(a.x, a.y));
            assert!(p.dst.bbox.contains(b.x, b.y));
        }
    }
}
