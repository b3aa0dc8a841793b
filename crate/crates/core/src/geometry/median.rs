use nalgebra::{Matrix3, Vector3};

use super::Offset;

/// Stopping rule for Weiszfeld iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeiszfeldOptions {
    /// Stop once an iterate moves less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WeiszfeldOptions {
    fn default() -> Self {
        WeiszfeldOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Distance below which an iterate is treated as sitting on a data point.
const COINCIDENCE: f64 = 1e-12;
/// Step taken off a non-optimal data point along the descent direction.
const NUDGE: f64 = 1e-6;
/// Backtracking halvings tried on a Newton step before falling back.
const NEWTON_HALVINGS: usize = 30;

/// Sum of Euclidean distances from `x` to every point.
pub fn median_objective(x: &Offset, pts: &[Offset]) -> f64 {
    pts.iter().map(|p| (*x - *p).norm()).sum()
}

/// Geometric median with default options.
pub fn geometric_median(pts: &[Offset]) -> Offset {
    geometric_median_with(pts, WeiszfeldOptions::default())
}

/// Weiszfeld's algorithm started from the coordinate-wise median, with a
/// safeguarded Newton step taken instead whenever it descends further.
///
/// When an iterate lands on a data point the subgradient condition is checked
/// there: the point is returned if it is optimal, otherwise the iterate is
/// nudged along the negative subgradient. The data point nearest to the final
/// iterate gets the same check, so optima sitting exactly on a data point are
/// returned exactly.
///
/// Panics if `pts` is empty.
pub fn geometric_median_with(pts: &[Offset], opts: WeiszfeldOptions) -> Offset {
    assert!(!pts.is_empty(), "geometric median of an empty set");
    if pts.len() == 1 {
        return pts[0];
    }

    let mut x = coordinate_median(pts);
    for _ in 0..opts.max_iter {
        let (pull, multiplicity) = residual_pull(&x, pts);
        if multiplicity > 0 {
            let r = pull.norm();
            if r <= multiplicity as f64 {
                return x;
            }
            x = x - pull.scale(NUDGE / r);
            continue;
        }

        let next = descent_step(&x, pts);
        let step = (next - x).norm();
        x = next;
        if step < opts.tol {
            break;
        }
    }

    // A vertex optimum is only approached sublinearly; snap to it if optimal.
    let nearest = pts
        .iter()
        .copied()
        .min_by(|a, b| (x - *a).norm().total_cmp(&(x - *b).norm()))
        .expect("non-empty");
    let (pull, multiplicity) = residual_pull(&nearest, pts);
    if pull.norm() <= multiplicity as f64
        && median_objective(&nearest, pts) <= median_objective(&x, pts)
    {
        return nearest;
    }
    x
}

/// One Weiszfeld update, replaced by a damped Newton step whenever that
/// reaches a lower objective. Plain Weiszfeld crawls when the optimum lies
/// close to a data point; the Newton step does not. Requires `x` to be off
/// every data point.
fn descent_step(x: &Offset, pts: &[Offset]) -> Offset {
    let mut num = Offset::ZERO;
    let mut den = 0.0;
    let mut grad = Vector3::zeros();
    let mut hess = Matrix3::zeros();
    for p in pts {
        let d = *x - *p;
        let r = d.norm();
        num = num + p.scale(1.0 / r);
        den += 1.0 / r;
        let u = Vector3::from(d.to_array()) / r;
        grad += u;
        hess += (Matrix3::identity() - u * u.transpose()) / r;
    }
    let weiszfeld = num.scale(1.0 / den);
    let mut best = weiszfeld;
    let best_f = median_objective(&weiszfeld, pts).min(median_objective(x, pts));
    if let Some(inv) = hess.try_inverse() {
        let mut s = -(inv * grad);
        for _ in 0..NEWTON_HALVINGS {
            let cand = *x + Offset::new(s[0], s[1], s[2]);
            let f = median_objective(&cand, pts);
            if f < best_f {
                best = cand;
                break;
            }
            s /= 2.0;
        }
    }
    best
}

/// Sum of unit vectors from every data point not coinciding with `x` toward
/// `x`, plus the number of coinciding points.
fn residual_pull(x: &Offset, pts: &[Offset]) -> (Offset, usize) {
    let mut pull = Offset::ZERO;
    let mut multiplicity = 0;
    for p in pts {
        let d = *x - *p;
        let n = d.norm();
        if n < COINCIDENCE {
            multiplicity += 1;
        } else {
            pull = pull + d.scale(1.0 / n);
        }
    }
    (pull, multiplicity)
}

fn coordinate_median(pts: &[Offset]) -> Offset {
    let mut out = [0.0; 3];
    let mut buf: Vec<f64> = Vec::with_capacity(pts.len());
    for (k, o) in out.iter_mut().enumerate() {
        buf.clear();
        buf.extend(pts.iter().map(|p| p.to_array()[k]));
        buf.sort_by(f64::total_cmp);
        let n = buf.len();
        *o = if n % 2 == 1 {
            buf[n / 2]
        } else {
            0.5 * (buf[n / 2 - 1] + buf[n / 2])
        };
    }
    Offset::from_array(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(a: f64, b: f64, c: f64) -> Offset {
        Offset::new(a, b, c)
    }

    #[test]
    fn single_point_is_its_own_median() {
        assert_eq!(geometric_median(&[o(1.0, 2.0, 3.0)]), o(1.0, 2.0, 3.0));
    }

    #[test]
    fn square_median_is_center() {
        let pts = [
            o(0.0, 0.0, 0.0),
            o(1.0, 0.0, 0.0),
            o(0.0, 1.0, 0.0),
            o(1.0, 1.0, 0.0),
        ];
        let m = geometric_median(&pts);
        assert!((m - o(0.5, 0.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn majority_point_wins() {
        let pts = [o(0.0, 0.0, 0.0), o(0.0, 0.0, 0.0), o(10.0, 0.0, 0.0)];
        let m = geometric_median(&pts);
        // Grid oracle: the objective along the segment is 20 - x + ... minimized at 0.
        let best_grid = (0..=1000)
            .map(|i| median_objective(&o(i as f64 * 0.01, 0.0, 0.0), &pts))
            .fold(f64::INFINITY, f64::min);
        assert!(median_objective(&m, &pts) <= best_grid + 1e-12);
        assert!(m.norm() < 1e-9);
    }

    #[test]
    fn vertex_optimum_is_returned_exactly() {
        // Obtuse triangle: the optimum is the obtuse vertex.
        let pts = [o(0.0, 0.0, 0.0), o(10.0, 0.5, 0.0), o(-10.0, 0.5, 0.0)];
        assert_eq!(geometric_median(&pts), o(0.0, 0.0, 0.0));
    }

    #[test]
    fn start_on_non_optimal_data_point_moves_off() {
        // Coordinate median of these lands on (0,0,0), which is not optimal.
        let pts = [
            o(0.0, 0.0, 0.0),
            o(0.0, 5.0, 0.0),
            o(5.0, 5.0, 0.0),
            o(5.0, 0.0, 0.0),
            o(0.0, 0.0, 5.0),
        ];
        let m = geometric_median(&pts);
        let f = median_objective(&m, &pts);
        assert!(f < median_objective(&pts[0], &pts));
    }

    #[test]
    fn one_outlier_among_identical_offsets() {
        let mut pts = vec![o(4.0, -2.0, 0.5); 5];
        pts.push(o(80.0, 60.0, -3.0));
        assert_eq!(geometric_median(&pts), o(4.0, -2.0, 0.5));
    }
}
