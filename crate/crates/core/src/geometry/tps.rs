use nalgebra::DMatrix;

use super::{BBox, Point};
use crate::error::{Error, Result};

/// Thin-plate spline warp `R^2 -> R^2` fitted to control-point pairs.
#[derive(Debug, Clone)]
pub struct TpsMap {
    control: Vec<Point>,
    /// `[a0, ax, ay]` per output coordinate.
    affine: [[f64; 3]; 2],
    /// Kernel weight per control point, one column per output coordinate.
    weights: Vec<[f64; 2]>,
    lambda: f64,
}

/// Radial basis `U(r) = r^2 log r^2`, written in terms of `r^2`.
fn kernel(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        r2 * r2.ln()
    }
}

impl TpsMap {
    /// Fits the spline mapping `src[i]` to `dst[i]`. With `lambda = 0` the
    /// map interpolates; larger values trade fidelity for smoothness.
    pub fn fit(src: &[Point], dst: &[Point], lambda: f64) -> Result<Self> {
        let m = src.len();
        if m != dst.len() {
            return Err(Error::TpsFit(format!(
                "{m} source points but {} target points",
                dst.len()
            )));
        }
        if m < 3 {
            return Err(Error::TpsFit(format!("need at least 3 point pairs, got {m}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::TpsFit(format!("regularization must be >= 0, got {lambda}")));
        }
        if let Some(i) = src
            .iter()
            .chain(dst)
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::TpsFit(format!("point #{} is not finite", i % m)));
        }
        check_configuration(src)?;

        let n = m + 3;
        let mut l = DMatrix::<f64>::zeros(n, n);
        for i in 0..m {
            for j in 0..m {
                let dx = src[i][0] - src[j][0];
                let dy = src[i][1] - src[j][1];
                l[(i, j)] = kernel(dx * dx + dy * dy);
            }
            l[(i, i)] += lambda;
            let row = [1.0, src[i][0], src[i][1]];
            for (k, v) in row.iter().enumerate() {
                l[(i, m + k)] = *v;
                l[(m + k, i)] = *v;
            }
        }
        let mut rhs = DMatrix::<f64>::zeros(n, 2);
        for (i, p) in dst.iter().enumerate() {
            rhs[(i, 0)] = p[0];
            rhs[(i, 1)] = p[1];
        }

        let sol = l
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::TpsFit("singular system".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::TpsFit("ill-conditioned system".into()));
        }

        let weights = (0..m).map(|i| [sol[(i, 0)], sol[(i, 1)]]).collect();
        let affine = [
            [sol[(m, 0)], sol[(m + 1, 0)], sol[(m + 2, 0)]],
            [sol[(m, 1)], sol[(m + 1, 1)], sol[(m + 2, 1)]],
        ];
        Ok(TpsMap {
            control: src.to_vec(),
            affine,
            weights,
            lambda,
        })
    }

    /// The identity warp on three fixed control points.
    pub fn identity() -> Self {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        TpsMap::fit(&pts, &pts, 0.0).expect("identity fit")
    }

    pub fn apply(&self, p: Point) -> Point {
        let [a, b] = &self.affine;
        let mut x = a[0] + a[1] * p[0] + a[2] * p[1];
        let mut y = b[0] + b[1] * p[0] + b[2] * p[1];
        for (c, w) in self.control.iter().zip(&self.weights) {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let u = kernel(dx * dx + dy * dy);
            x += w[0] * u;
            y += w[1] * u;
        }
        [x, y]
    }

    pub fn control_points(&self) -> &[Point] {
        &self.control
    }

    pub fn affine(&self) -> [[f64; 3]; 2] {
        self.affine
    }

    pub fn kernel_weights(&self) -> &[[f64; 2]] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Largest absolute kernel weight.
    pub fn max_kernel_weight(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Largest violation of the side conditions `sum w = sum w x = sum w y = 0`.
    pub fn side_condition_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..2 {
            let mut s = [0.0; 3];
            for (c, w) in self.control.iter().zip(&self.weights) {
                s[0] += w[k];
                s[1] += w[k] * c[0];
                s[2] += w[k] * c[1];
            }
            worst = s.iter().fold(worst, |acc, v| acc.max(v.abs()));
        }
        worst
    }
}

/// Rejects duplicated or collinear control points, naming the culprits.
fn check_configuration(src: &[Point]) -> Result<()> {
    let scale = src
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let eps = 1e-9 * scale;
    for i in 0..src.len() {
        for j in i + 1..src.len() {
            let d = ((src[i][0] - src[j][0]).powi(2) + (src[i][1] - src[j][1]).powi(2)).sqrt();
            if d <= eps {
                return Err(Error::TpsFit(format!(
                    "control points #{i} and #{j} coincide at ({}, {})",
                    src[i][0], src[i][1]
                )));
            }
        }
    }
    let far = (1..src.len())
        .max_by(|&a, &b| dist(src[0], src[a]).total_cmp(&dist(src[0], src[b])))
        .expect("m >= 3");
    let base = dist(src[0], src[far]);
    let dir = [
        (src[far][0] - src[0][0]) / base,
        (src[far][1] - src[0][1]) / base,
    ];
    let spread = src
        .iter()
        .map(|p| ((p[0] - src[0][0]) * dir[1] - (p[1] - src[0][1]) * dir[0]).abs())
        .fold(0.0f64, f64::max);
    if spread <= 1e-9 * base {
        return Err(Error::TpsFit(format!(
            "all control points are collinear with #0 and #{far}"
        )));
    }
    Ok(())
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Bounding box of the four warped corners of `b`.
pub fn warp_box_tight(map: &TpsMap, b: &BBox) -> Result<BBox> {
    let corners = [
        [b.x_min, b.y_min],
        [b.x_max, b.y_min],
        [b.x_min, b.y_max],
        [b.x_max, b.y_max],
    ]
    .map(|p| map.apply(p));
    let out = BBox::bounding(&corners).expect("four corners");
    out.validate()
        .map_err(|_| Error::DegenerateWarp(format!("{b:?} warps to {out:?}")))?;
    Ok(out)
}
