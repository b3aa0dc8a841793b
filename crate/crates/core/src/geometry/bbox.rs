use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in continuous image coordinates (origin top-left, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from its center and side lengths.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }

    pub fn validate(&self) -> Result<()> {
        let reason = if ![self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
        {
            Some("non-finite coordinate")
        } else if self.x_min >= self.x_max {
            Some("x_min must be < x_max")
        } else if self.y_min >= self.y_max {
            Some("y_min must be < y_max")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidBox {
                x_min: self.x_min,
                y_min: self.y_min,
                x_max: self.x_max,
                y_max: self.y_max,
                reason,
            }),
            None => Ok(()),
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        ]
    }

    /// Area of the intersection; zero when the boxes are disjoint or only touch.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// True when the boxes share a region of positive area.
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.intersection_area(other) > 0.0
    }

    /// Closed-interval point membership.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Scales the box about the origin.
    pub fn scale(&self, s: f64) -> BBox {
        BBox {
            x_min: self.x_min * s,
            y_min: self.y_min * s,
            x_max: self.x_max * s,
            y_max: self.y_max * s,
        }
    }

    /// Clips to `[0, width] x [0, height]`. Returns `None` if nothing of
    /// positive area is left.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.max(0.0),
            y_min: self.y_min.max(0.0),
            x_max: self.x_max.min(width),
            y_max: self.y_max.min(height),
        };
        b.validate().ok().map(|_| b)
    }

    /// Tight box around a set of points.
    pub fn bounding(points: &[[f64; 2]]) -> Option<BBox> {
        let mut it = points.iter();
        let first = it.next()?;
        let mut b = BBox {
            x_min: first[0],
            y_min: first[1],
            x_max: first[0],
            y_max: first[1],
        };
        for p in it {
            b.x_min = b.x_min.min(p[0]);
            b.y_min = b.y_min.min(p[1]);
            b.x_max = b.x_max.max(p[0]);
            b.y_max = b.y_max.max(p[1]);
        }
        Some(b)
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Fraction of `r` that lies inside `b`: `|b ∩ r| / |r|`.
pub fn containment_ratio(b: &BBox, r: &BBox) -> f64 {
    (b.intersection_area(r) / r.area()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(a: f64, b: f64, c: f64, d: f64) -> BBox {
        BBox::new(a, b, c, d).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20.0, 20.0, 30.0, 30.0)), 0.0);
        // inter = 50, union = 150
        assert!((iou(&a, &bx(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn containment_examples() {
        let b = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(containment_ratio(&b, &bx(2.0, 2.0, 4.0, 4.0)), 1.0);
        assert_eq!(containment_ratio(&b, &bx(20.0, 0.0, 30.0, 10.0)), 0.0);
        assert!((containment_ratio(&b, &bx(5.0, 0.0, 15.0, 10.0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(BBox::new(1.0, 0.0, 1.0, 5.0).is_err());
        assert!(BBox::new(0.0, 3.0, 1.0, 2.0).is_err());
        assert!(BBox::new(0.0, f64::NAN, 1.0, 2.0).is_err());
    }

    #[test]
    fn edge_touching_boxes_do_not_overlap() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(10.0, 0.0, 20.0, 10.0);
        assert!(!a.overlaps(&b));
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_monotone_as_gap_shrinks() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let mut prev = -1.0;
        for step in 0..=40 {
            let shift = 20.0 - 0.5 * step as f64;
            let v = iou(&a, &a.translate(shift, 0.0));
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn clip_drops_outside_boxes() {
        let b = bx(-5.0, -5.0, 5.0, 5.0);
        assert_eq!(b.clip(100.0, 100.0), Some(bx(0.0, 0.0, 5.0, 5.0)));
        assert_eq!(bx(200.0, 0.0, 210.0, 5.0).clip(100.0, 100.0), None);
    }
}
