use serde::{Deserialize, Serialize};

use super::nominal::StepManifold;
use super::PlannerError;

/// Crossing of two adjacent step manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionPoint {
    /// Sagittal position of the switch [m].
    pub x_trans: f64,
    /// Sagittal velocity at the switch [m/s].
    pub xdot_trans: f64,
    /// Arc length along the current manifold from its apex to the switch,
    /// measured in the `(x, ẋ/ω)` plane.
    pub zeta_trans: f64,
}

const X_TOL: f64 = 1e-13;

/// Finds where the `ẋ²(x)` curves of two consecutive steps cross.
///
/// The search is restricted to the overlap of both curves between the two
/// feet; the smallest crossing with positive velocity is returned.
pub fn find_transition(
    current: &StepManifold,
    next: &StepManifold,
) -> Result<TransitionPoint, PlannerError> {
    let overlap_lo = current.x_min().max(next.x_min());
    let overlap_hi = current.x_max().min(next.x_max());
    if !(overlap_hi > overlap_lo) {
        return Err(PlannerError::NoTransition {
            lo: overlap_lo,
            hi: overlap_hi,
        });
    }
    let diff = |x: f64| -> f64 {
        current.curve.eval(x).expect("inside overlap") - next.curve.eval(x).expect("inside overlap")
    };
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        let mut points: Vec<f64> = current
            .curve
            .knots()
            .iter()
            .chain(next.curve.knots())
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        points.push(lo);
        points.push(hi);
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    };

    let all = grid(overlap_lo, overlap_hi);
    let scale = all
        .iter()
        .map(|&x| current.curve.eval(x).unwrap().abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    if all.iter().all(|&x| diff(x).abs() <= 1e-12 * scale) {
        return Err(PlannerError::DegenerateTransition);
    }

    let lo = overlap_lo.max(current.descriptor.x_foot);
    let hi = overlap_hi.min(next.descriptor.x_foot);
    if !(hi > lo) {
        return Err(PlannerError::NoTransition { lo, hi });
    }
    let points = grid(lo, hi);
    let values: Vec<f64> = points.iter().map(|&x| diff(x)).collect();

    for i in 0..points.len() {
        let root = if values[i] == 0.0 {
            Some(points[i])
        } else if i + 1 < points.len() && values[i].signum() != values[i + 1].signum() && values[i + 1] != 0.0 {
            Some(refine(&diff, points[i], points[i + 1], values[i]))
        } else {
            None
        };
        if let Some(x) = root {
            let w = current.curve.eval(x).unwrap();
            if w > 0.0 {
                return Ok(TransitionPoint {
                    x_trans: x,
                    xdot_trans: w.sqrt(),
                    zeta_trans: current
                        .arc_length(current.descriptor.x_foot, x)
                        .expect("transition lies on the current manifold"),
                });
            }
        }
    }
    Err(PlannerError::NoTransition { lo, hi })
}

/// Bisection on a sign-changing bracket, finished with one secant step.
fn refine(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > X_TOL {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let fb = f(b);
    let x = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
    if x >= a && x <= b {
        x
    } else {
        0.5 * (a + b)
    }
}
