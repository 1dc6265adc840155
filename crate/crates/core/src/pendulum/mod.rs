//! Prismatic inverted pendulum dynamics.
//!
//! The CoM is constrained to a lateral-invariant plane `z = a·x + b`, which
//! decouples the sagittal (`x`) and lateral (`y`) motions. Each plane obeys
//!
//! ```text
//! q̈ = ω² (q − q_foot) − ω² τ / (m g)
//! ```
//!
//! with `τ = τ_y` for the sagittal plane and `τ = τ_x` for the lateral plane.

mod dynamics;
mod integrate;
mod surface;

pub use dynamics::{
    closed_form_lateral, closed_form_state, lateral_derivative, orbital_energy,
    sagittal_derivative, time_to_apex, LateralState, PendulumPlane, SagittalState,
};
pub use integrate::{
    integrate_trajectory, step, ControlSchedule, IntegratorOptions, Scheme, Trajectory,
    TrajectorySample, DEFAULT_DT,
};
pub use surface::{omega_from_surface, surface_height, FootPosition, PathSurface};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity used throughout the toolkit [m/s²].
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PendulumError {
    #[error("torque {torque} N·m outside limits [{min}, {max}]")]
    TorqueOutOfBounds { torque: f64, min: f64, max: f64 },
    #[error("CoM surface at or below the foot: apex height {z_apex} m")]
    Geometry { z_apex: f64 },
    #[error("integration diverged at step {step}")]
    Divergence { step: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state never reaches the apex (orbital energy {energy})")]
    NoApex { energy: f64 },
}

/// Closed interval of admissible torques [N·m].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueLimits {
    pub min: f64,
    pub max: f64,
}

impl TorqueLimits {
    pub fn symmetric(bound: f64) -> Self {
        Self {
            min: -bound,
            max: bound,
        }
    }

    pub fn contains(&self, torque: f64) -> bool {
        torque >= self.min && torque <= self.max
    }

    pub fn check(&self, torque: f64) -> Result<(), PendulumError> {
        if self.contains(torque) {
            Ok(())
        } else {
            Err(PendulumError::TorqueOutOfBounds {
                torque,
                min: self.min,
                max: self.max,
            })
        }
    }
}

/// Parameters of one contact phase: everything that defines its vector field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParameters {
    /// Phase-space asymptotic slope [1/s].
    pub omega: f64,
    pub foot: FootPosition,
    pub surface: PathSurface,
    /// Total mass [kg].
    pub mass: f64,
    /// Gravity magnitude [m/s²].
    pub gravity: f64,
    pub tau_y_limits: TorqueLimits,
    pub tau_x_limits: TorqueLimits,
}

impl StepParameters {
    /// Unit mass, standard gravity and ±3 N·m torque limits.
    pub fn new(omega: f64, foot: FootPosition, surface: PathSurface) -> Self {
        Self {
            omega,
            foot,
            surface,
            mass: 1.0,
            gravity: GRAVITY,
            tau_y_limits: TorqueLimits::symmetric(3.0),
            tau_x_limits: TorqueLimits::symmetric(3.0),
        }
    }

    /// Builds parameters whose `ω` follows from the surface geometry.
    pub fn from_geometry(
        foot: FootPosition,
        surface: PathSurface,
        gravity: f64,
    ) -> Result<Self, PendulumError> {
        let omega = omega_from_surface(&surface, &foot, gravity)?;
        let mut p = Self::new(omega, foot, surface);
        p.gravity = gravity;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PendulumError> {
        let bad = |what: &str| Err(PendulumError::InvalidParameter(what.to_string()));
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return bad("omega must be positive");
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return bad("gravity must be positive");
        }
        if self.tau_y_limits.min > self.tau_y_limits.max
            || self.tau_x_limits.min > self.tau_x_limits.max
        {
            return bad("torque lower limit exceeds upper limit");
        }
        Ok(())
    }

    /// Coefficient `ω² / (m g)` multiplying the flywheel torque.
    pub fn torque_gain(&self) -> f64 {
        self.omega * self.omega / (self.mass * self.gravity)
    }

    /// Same contact with a different asymptotic slope, as commanded by the controller.
    pub fn with_omega(&self, omega: f64) -> Self {
        Self { omega, ..*self }
    }
}
