use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use super::PlannerError;

/// Share of a step's time slot spent in dual contact by default.
pub const DEFAULT_DUAL_FRACTION: f64 = 0.25;

/// Position, velocity and acceleration of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Boundary {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
}

impl Boundary {
    pub fn new(pos: f64, vel: f64, acc: f64) -> Self {
        Self { pos, vel, acc }
    }
}

/// `p(t) = Σ c_k t^k`, `k = 0..=5`, with `t` measured from the segment start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quintic {
    pub coeffs: [f64; 6],
}

impl Quintic {
    /// `(p, ṗ, p̈)` at local time `t`.
    pub fn eval(&self, t: f64) -> Boundary {
        let c = &self.coeffs;
        let mut p = 0.0;
        let mut v = 0.0;
        let mut a = 0.0;
        for k in (0..6).rev() {
            p = p * t + c[k];
        }
        for k in (1..6).rev() {
            v = v * t + k as f64 * c[k];
        }
        for k in (2..6).rev() {
            a = a * t + (k * (k - 1)) as f64 * c[k];
        }
        Boundary::new(p, v, a)
    }
}

/// Dual-contact bridge: one quintic per coordinate over a common duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuinticSegment {
    pub duration: f64,
    pub axes: Vec<Quintic>,
}

impl QuinticSegment {
    pub fn eval(&self, t: f64) -> Vec<Boundary> {
        self.axes.iter().map(|q| q.eval(t)).collect()
    }
}

fn solve_axis(entry: &Boundary, exit: &Boundary, d: f64) -> Result<Quintic, PlannerError> {
    let row = |t: f64, deriv: usize| -> [f64; 6] {
        let mut r = [0.0; 6];
        for (k, slot) in r.iter_mut().enumerate() {
            if k < deriv {
                continue;
            }
            let factor: f64 = ((k - deriv + 1)..=k).map(|j| j as f64).product();
            *slot = factor * t.powi((k - deriv) as i32);
        }
        r
    };
    let rows = [row(0.0, 0), row(0.0, 1), row(0.0, 2), row(d, 0), row(d, 1), row(d, 2)];
    let m = Matrix6::from_fn(|i, j| rows[i][j]);
    let rhs = Vector6::new(entry.pos, entry.vel, entry.acc, exit.pos, exit.vel, exit.acc);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| PlannerError::DegenerateSegment("singular boundary system".into()))?;
    Ok(Quintic {
        coeffs: [sol[0], sol[1], sol[2], sol[3], sol[4], sol[5]],
    })
}

/// Fits the quintic per coordinate that meets the entry and exit boundary
/// conditions over `fraction · step_duration` seconds.
pub fn fit_multicontact(
    entry: &[Boundary],
    exit: &[Boundary],
    fraction: f64,
    step_duration: f64,
) -> Result<QuinticSegment, PlannerError> {
    if entry.len() != exit.len() {
        return Err(PlannerError::DegenerateSegment(format!(
            "{} entry and {} exit coordinates",
            entry.len(),
            exit.len()
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PlannerError::DegenerateSegment(format!(
            "duration fraction {fraction} outside (0, 1)"
        )));
    }
    if !(step_duration > 0.0 && step_duration.is_finite()) {
        return Err(PlannerError::DegenerateSegment(format!(
            "step duration {step_duration} s is not positive"
        )));
    }
    let duration = fraction * step_duration;
    let axes = entry
        .iter()
        .zip(exit)
        .map(|(a, b)| solve_axis(a, b, duration))
        .collect::<Result<_, _>>()?;
    Ok(QuinticSegment { duration, axes })
}
