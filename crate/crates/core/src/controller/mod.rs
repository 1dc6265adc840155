//! Recovery control for the sagittal plane.
//!
//! A dynamic-programming policy over `(x, ẋ)` steers disturbed states back to
//! the nominal manifold with the asymptotic slope `ω` and flywheel torque
//! `τ_y`. Inside the boundary layer `|σ| ≤ ε` the commanded controls are
//! blended toward their references to avoid chattering. When a state cannot
//! be recovered before the transition, the next foot is re-planned.

mod bundle;
mod closed_loop;
mod dp;

pub use bundle::{cell_recoverable, estimate_recoverability, RecoverabilityMask};
pub use closed_loop::{rollout, BoundaryLayer, ClosedLoopSample, Rollout};
pub use dp::{
    solve_dp, ControlAxis, DpConfig, DpModel, DpWeights, GridAxis, Interpolation, PolicyEntry,
    PolicyTable, StepOutcome,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifold::ManifoldDescriptor;
use crate::pendulum::SagittalState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("invalid controller configuration: {0}")]
    Config(String),
    #[error("foot re-planning infeasible: transition speed {xdot_trans} m/s below target apex speed {xdot_apex} m/s")]
    InfeasibleReplan { xdot_trans: f64, xdot_apex: f64 },
    #[error("closed-loop rollout stalled at x = {x} m")]
    Stalled { x: f64 },
    #[error("closed-loop rollout did not reach x = {target} m within {time} s")]
    Timeout { target: f64, time: f64 },
}

/// Continuous sagittal controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    /// Asymptotic slope [1/s].
    pub omega: f64,
    /// Flywheel pitch torque [N·m].
    pub tau_y: f64,
}

impl Control {
    pub fn new(omega: f64, tau_y: f64) -> Self {
        Self { omega, tau_y }
    }
}

/// Integrand `βσ² + Γ1(τ−τ_ref)² + Γ2(ω−ω_ref)²` evaluated once and
/// multiplied by the stage width.
pub fn stage_cost(sigma: f64, tau_y: f64, omega: f64, cfg: &DpConfig, stage_width: f64) -> f64 {
    let w = &cfg.weights;
    let dt = tau_y - cfg.tau_ref;
    let dw = omega - cfg.omega_ref;
    (w.beta * sigma * sigma + w.gamma1 * dt * dt + w.gamma2 * dw * dw) * stage_width
}

/// Boundary-layer saturation: the policy output outside `|σ| ≤ ε`, otherwise
/// a blend from the entry control `u_epsilon` toward the reference.
pub fn saturate_control(
    sigma: f64,
    epsilon: f64,
    u_policy: Control,
    u_epsilon: Control,
    u_ref: Control,
) -> Control {
    let s = sigma.abs();
    if s > epsilon {
        return u_policy;
    }
    let a = s / epsilon;
    let b = (epsilon - s) / epsilon;
    Control::new(
        a * u_epsilon.omega + b * u_ref.omega,
        a * u_epsilon.tau_y + b * u_ref.tau_y,
    )
}

/// `V̇` for `V = σ²/2` when the commanded slope equals the nominal one.
pub fn lyapunov_rate(
    state: &SagittalState,
    sigma: f64,
    tau_y: f64,
    m: &ManifoldDescriptor,
    mass: f64,
    gravity: f64,
) -> f64 {
    -2.0 * m.xdot_apex * m.xdot_apex * sigma * state.xd * tau_y / (mass * gravity)
}

/// Largest initial deviation the torque alone can bring back to `ε` between
/// `x0` and `x_trans`.
pub fn max_tube_radius(
    epsilon: f64,
    xdot_apex: f64,
    mass: f64,
    gravity: f64,
    x_trans: f64,
    x0: f64,
    tau_y: f64,
) -> f64 {
    let mu = 2.0 * std::f64::consts::SQRT_2 * xdot_apex * xdot_apex / (mass * gravity);
    epsilon + std::f64::consts::FRAC_1_SQRT_2 * mu * (x_trans - x0) * tau_y
}

/// Next sagittal foot such that coasting from the transition state reaches
/// the planned apex speed exactly over the foot. Only the forward root is
/// returned.
pub fn replan_foot(
    x_trans: f64,
    xdot_trans_rep: f64,
    xdot_apex_next: f64,
    omega: f64,
) -> Result<f64, ControllerError> {
    let radicand = xdot_trans_rep * xdot_trans_rep - xdot_apex_next * xdot_apex_next;
    if !(radicand >= 0.0) || !(omega > 0.0) {
        return Err(ControllerError::InfeasibleReplan {
            xdot_trans: xdot_trans_rep,
            xdot_apex: xdot_apex_next,
        });
    }
    Ok(x_trans + radicand.sqrt() / omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::closed_form_state;

    #[test]
    fn stage_cost_values() {
        let cfg = DpConfig::default();
        assert_eq!(stage_cost(0.0, 0.0, cfg.omega_ref, &cfg, 0.01), 0.0);
        assert!((stage_cost(0.01, 0.0, cfg.omega_ref, &cfg, 0.01) - 0.04).abs() < 1e-15);
        let mut beta_only = cfg.clone();
        beta_only.weights.gamma1 = 0.0;
        let one = stage_cost(0.02, 0.0, cfg.omega_ref, &beta_only, 0.01);
        let two = stage_cost(0.04, 0.0, cfg.omega_ref, &beta_only, 0.01);
        assert!((two / one - 4.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_cases() {
        let (p, e, r) = (Control::new(3.4, 3.0), Control::new(3.0, 1.0), Control::new(3.13, 0.0));
        assert_eq!(saturate_control(2e-3, 1e-3, p, e, r), p);
        assert_eq!(saturate_control(-2e-3, 1e-3, p, e, r), p);
        assert_eq!(saturate_control(0.0, 1e-3, p, e, r), r);
        assert_eq!(saturate_control(1e-3, 1e-3, p, e, r), e);
        assert_eq!(saturate_control(-1e-3, 1e-3, p, e, r), e);
    }

    #[test]
    fn lyapunov_rate_values() {
        let m = ManifoldDescriptor::new(0.6, 1.2, 3.13);
        let s = SagittalState::new(1.1, 0.7);
        assert_eq!(lyapunov_rate(&s, 0.004, 0.0, &m, 1.0, 9.81), 0.0);
        let v = lyapunov_rate(&s, 0.004, 3.0, &m, 1.0, 9.81);
        assert!((v - (-2.0 * 0.36 * 0.004 * 0.7 * 3.0 / 9.81)).abs() < 1e-18);
        assert!((v + 6.165e-4).abs() < 1e-7);
    }

    #[test]
    fn tube_radius_values() {
        assert_eq!(max_tube_radius(1e-3, 0.6, 1.0, 9.81, 1.5, 1.2, 0.0), 1e-3);
        let r = max_tube_radius(1e-3, 0.6, 1.0, 9.81, 1.3, 1.0, 3.0);
        assert!((r - 0.067055).abs() < 1e-6, "{r}");
        let r2 = max_tube_radius(1e-3, 0.6, 1.0, 9.81, 1.6, 1.0, 3.0);
        assert!(((r2 - 1e-3) / (r - 1e-3) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn replanned_foot_reaches_the_apex() {
        let x = replan_foot(1.0, 0.8, 0.6, 3.13).unwrap();
        assert!((x - 1.169058).abs() < 1e-6);
        // Coast from (1.0, 0.8) over the new foot until ẋ is smallest.
        let t = crate::pendulum::time_to_apex(&SagittalState::new(1.0, 0.8), x, 3.13).unwrap();
        let apex = closed_form_state(1.0, 0.8, x, 3.13, t);
        assert!((apex.x - x).abs() < 1e-9 && (apex.xd - 0.6).abs() < 1e-9);
        assert_eq!(replan_foot(1.0, 0.6, 0.6, 3.13).unwrap(), 1.0);
        assert!(matches!(
            replan_foot(1.0, 0.5, 0.6, 3.13),
            Err(ControllerError::InfeasibleReplan { .. })
        ));
    }
}
