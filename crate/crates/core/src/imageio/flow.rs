use crate::error::{Error, Result};

/// Dense source-to-target displacement field with a validity mask and a
/// per-pixel matching score. Row-major planes of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub valid: Vec<bool>,
    pub score: Vec<f64>,
}

impl FlowField {
    /// All-invalid field of zeros.
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        FlowField {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
            valid: vec![false; n],
            score: vec![0.0; n],
        }
    }

    /// Field with the same displacement everywhere, all pixels valid.
    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        let n = width * height;
        FlowField {
            width,
            height,
            u: vec![u; n],
            v: vec![v; n],
            valid: vec![true; n],
            score: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn check(&self) -> Result<()> {
        let n = self.len();
        if self.u.len() != n || self.v.len() != n || self.valid.len() != n || self.score.len() != n
        {
            return Err(Error::DimensionMismatch(format!(
                "flow planes do not match {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Bilinear sample of `(u, v)` at a real coordinate, or `None` outside
    /// the pixel grid.
    pub fn sample(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let lerp = |plane: &[f32]| {
            let at = |xx: usize, yy: usize| plane[yy * self.width + xx] as f64;
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        };
        Some([lerp(&self.u), lerp(&self.v)])
    }

    /// Mean endpoint error against a reference displacement function, over
    /// valid pixels only. `None` if no pixel is valid.
    pub fn mean_epe_valid(&self, truth: impl Fn(usize, usize) -> [f64; 2]) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                let i = self.index(x, y);
                if !self.valid[i] {
                    continue;
                }
                let t = truth(x, y);
                let du = self.u[i] as f64 - t[0];
                let dv = self.v[i] as f64 - t[1];
                sum += (du * du + dv * dv).sqrt();
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }
}
