use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use super::BBox;

/// Box embedding into (center x, center y, log2 of sqrt(area)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationVector {
    pub cx: f64,
    pub cy: f64,
    pub sc: f64,
}

impl LocationVector {
    pub fn of(b: &BBox) -> Self {
        let [cx, cy] = b.center();
        LocationVector {
            cx,
            cy,
            sc: 0.5 * b.area().log2(),
        }
    }
}

impl From<&BBox> for LocationVector {
    fn from(b: &BBox) -> Self {
        LocationVector::of(b)
    }
}

/// Difference of two location vectors; an element of the Hough voting space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Offset {
    pub dx: f64,
    pub dy: f64,
    pub dsc: f64,
}

impl Offset {
    pub const ZERO: Offset = Offset {
        dx: 0.0,
        dy: 0.0,
        dsc: 0.0,
    };

    pub fn new(dx: f64, dy: f64, dsc: f64) -> Self {
        Offset { dx, dy, dsc }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.dx, self.dy, self.dsc]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Offset::new(a[0], a[1], a[2])
    }

    pub fn norm(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy + self.dsc * self.dsc).sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Offset::new(self.dx * s, self.dy * s, self.dsc * s)
    }
}

impl Sub for LocationVector {
    type Output = Offset;

    fn sub(self, rhs: LocationVector) -> Offset {
        Offset::new(self.cx - rhs.cx, self.cy - rhs.cy, self.sc - rhs.sc)
    }
}

impl Add for Offset {
    type Output = Offset;

    fn add(self, rhs: Offset) -> Offset {
        Offset::new(self.dx + rhs.dx, self.dy + rhs.dy, self.dsc + rhs.dsc)
    }
}

impl Sub for Offset {
    type Output = Offset;

    fn sub(self, rhs: Offset) -> Offset {
        Offset::new(self.dx - rhs.dx, self.dy - rhs.dy, self.dsc - rhs.dsc)
    }
}

/// Axis-aligned Gaussian `K(d) = exp(-1/2 * sum_k d_k^2 / sigma_k^2)` over
/// offset space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub sigma_xy: f64,
    pub sigma_s: f64,
}

impl GaussianKernel {
    pub fn new(sigma_xy: f64, sigma_s: f64) -> Self {
        GaussianKernel { sigma_xy, sigma_s }
    }

    /// Default bandwidths for a source image: `0.1 * max(W, H)` in position
    /// and half an octave in scale.
    pub fn for_image(width: usize, height: usize) -> Self {
        GaussianKernel::new(0.1 * width.max(height) as f64, 0.5)
    }

    pub fn sigmas(&self) -> [f64; 3] {
        [self.sigma_xy, self.sigma_xy, self.sigma_s]
    }

    /// Squared Mahalanobis length of `d`.
    pub fn mahalanobis_sq(&self, d: &Offset) -> f64 {
        let sx = d.dx / self.sigma_xy;
        let sy = d.dy / self.sigma_xy;
        let ss = d.dsc / self.sigma_s;
        sx * sx + sy * sy + ss * ss
    }

    pub fn eval(&self, d: &Offset) -> f64 {
        (-0.5 * self.mahalanobis_sq(d)).exp()
    }
}
