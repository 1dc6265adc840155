//! Nominal gait planning over rough terrain.
//!
//! Each contact contributes one phase-space manifold through its apex
//! keyframe; adjacent manifolds are joined at their crossing, lateral feet are
//! searched so the lateral velocity vanishes at every sagittal apex, and
//! optional dual-contact phases are bridged with quintic splines.

mod curve;
mod lateral;
mod multicontact;
mod nominal;
mod progression;
mod terrain;
mod transition;

pub use curve::PhaseCurve;
pub use lateral::{lateral_apex_velocity, lateral_foot_search, LateralSearch, LateralSolution};
pub use multicontact::{fit_multicontact, Boundary, Quintic, QuinticSegment, DEFAULT_DUAL_FRACTION};
pub use nominal::{generate_nominal, NominalOptions, NominalPlan, PlannedStep, StepManifold};
pub use progression::{advance_to_position, progression_map, Advance, NextStep, StepControls};
pub use terrain::{flat_terrain, generate_terrain, keyframes_for_terrain, TerrainParams, TerrainSpec, TerrainStep};
pub use transition::{find_transition, TransitionPoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pendulum::PendulumError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Pendulum(#[from] PendulumError),
    #[error("apex height {z_apex} m is not positive")]
    Geometry { z_apex: f64 },
    #[error("invalid plan input: {0}")]
    InvalidInput(String),
    #[error("planning infeasible between steps {from} and {to}: {reason}")]
    Infeasible { from: usize, to: usize, reason: String },
    #[error("no real crossing between the manifolds in [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64 },
    #[error("adjacent manifolds coincide")]
    DegenerateTransition,
    #[error("lateral search did not converge after {iterations} iterations (best foot {best_foot} m, apex velocity {best_velocity} m/s)")]
    NonConvergence {
        iterations: usize,
        best_foot: f64,
        best_velocity: f64,
    },
    #[error("degenerate multi-contact segment: {0}")]
    DegenerateSegment(String),
    #[error("the CoM stalls before reaching x = {target} m")]
    Stalled { target: f64 },
}

/// Desired apex condition of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApexKeyframe {
    /// Sagittal velocity at the apex [m/s].
    pub xdot_apex: f64,
    /// CoM height above the stance foot at the apex [m].
    pub z_apex: f64,
}

impl ApexKeyframe {
    pub fn new(xdot_apex: f64, z_apex: f64) -> Self {
        Self { xdot_apex, z_apex }
    }
}
