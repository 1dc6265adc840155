use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ApexKeyframe, PlannerError};
use crate::pendulum::{FootPosition, PathSurface};

/// One foothold and the CoM surface used while standing on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainStep {
    pub foot: FootPosition,
    /// Signed surface tilt [rad]; positive climbs with increasing `x`.
    pub tilt: f64,
    pub surface: PathSurface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainSpec {
    pub steps: Vec<TerrainStep>,
}

impl TerrainSpec {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.steps.is_empty() {
            return Err(PlannerError::InvalidInput("terrain has no steps".into()));
        }
        if self
            .steps
            .windows(2)
            .any(|w| !(w[1].foot.x > w[0].foot.x))
        {
            return Err(PlannerError::InvalidInput(
                "foot positions must be strictly increasing in x".into(),
            ));
        }
        Ok(())
    }

    /// Height changes between consecutive footholds.
    pub fn height_deltas(&self) -> Vec<f64> {
        self.steps.windows(2).map(|w| w[1].foot.z - w[0].foot.z).collect()
    }
}

/// Random step-terrain generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainParams {
    pub n_steps: usize,
    /// Smallest height change between footholds [m].
    pub dh_min: f64,
    /// Largest height change between footholds [m].
    pub dh_max: f64,
    /// Surface tilt magnitude [rad].
    pub tilt: f64,
    pub step_length: f64,
    /// Apex CoM height above every foot [m].
    pub com_height: f64,
    /// Lateral foot offset from the walking line [m].
    pub step_width: f64,
    pub seed: u64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            n_steps: 7,
            dh_min: 0.1,
            dh_max: 0.3,
            tilt: 10f64.to_radians(),
            step_length: 0.4,
            com_height: 1.0,
            step_width: 0.1,
            seed: 0,
        }
    }
}

impl TerrainParams {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |msg: &str| Err(PlannerError::InvalidInput(msg.to_string()));
        if self.n_steps < 1 {
            return bad("n_steps must be at least 1");
        }
        if !(self.dh_min > 0.0 && self.dh_min < self.dh_max && self.dh_max.is_finite()) {
            return bad("height bounds must satisfy 0 < dh_min < dh_max");
        }
        if !(self.step_length > 0.0 && self.com_height > 0.0) {
            return bad("step length and CoM height must be positive");
        }
        if !(self.tilt.abs() < std::f64::consts::FRAC_PI_2) {
            return bad("tilt must lie strictly between -90° and 90°");
        }
        Ok(())
    }
}

/// Lateral foot offset of step `k`; the first stance foot is on the right.
fn lateral_offset(k: usize, width: f64) -> f64 {
    if k.is_multiple_of(2) {
        -width
    } else {
        width
    }
}

fn assemble(heights: &[f64], params: &TerrainParams) -> TerrainSpec {
    let slope_mag = params.tilt.tan();
    let n = heights.len();
    let steps = (0..n)
        .map(|k| {
            let foot = FootPosition::new(
                k as f64 * params.step_length,
                lateral_offset(k, params.step_width),
                heights[k],
            );
            // The surface leans toward the next foothold; the last one keeps
            // the lean of the step leading into it.
            let rise = if k + 1 < n {
                heights[k + 1] - heights[k]
            } else if k > 0 {
                heights[k] - heights[k - 1]
            } else {
                0.0
            };
            let slope = if rise > 0.0 {
                slope_mag
            } else if rise < 0.0 {
                -slope_mag
            } else {
                0.0
            };
            TerrainStep {
                foot,
                tilt: slope.atan(),
                surface: PathSurface::through_apex(slope, &foot, params.com_height),
            }
        })
        .collect();
    TerrainSpec { steps }
}

/// Random stepping stones whose consecutive height changes are uniform on
/// `(−dh_max, −dh_min) ∪ (dh_min, dh_max)`. The result is a pure function
/// of the parameters, seed included.
pub fn generate_terrain(params: &TerrainParams) -> Result<TerrainSpec, PlannerError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut heights = Vec::with_capacity(params.n_steps);
    heights.push(0.0);
    for _ in 1..params.n_steps {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let dh = rng.random_range(params.dh_min..params.dh_max);
        heights.push(heights.last().unwrap() + sign * dh);
    }
    Ok(assemble(&heights, params))
}

/// Apex keyframes over a terrain: 0.6 m/s nudged down when climbing into a
/// step and up when descending, bounded to [0.4, 0.8] m/s.
pub fn keyframes_for_terrain(terrain: &TerrainSpec) -> Vec<ApexKeyframe> {
    terrain
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let dh = if k == 0 {
                0.0
            } else {
                s.foot.z - terrain.steps[k - 1].foot.z
            };
            ApexKeyframe::new((0.6 - 0.2 * dh).clamp(0.4, 0.8), s.surface.apex_height(&s.foot))
        })
        .collect()
}

/// Level ground with evenly spaced feet starting at `x = 0`.
pub fn flat_terrain(n: usize, step_length: f64, com_height: f64) -> TerrainSpec {
    let params = TerrainParams {
        n_steps: n,
        step_length,
        com_height,
        tilt: 0.0,
        ..Default::default()
    };
    assemble(&vec![0.0; n], &params)
}
