use serde::{Deserialize, Serialize};

use super::{PendulumError, StepParameters, TorqueLimits};

/// CoM position and velocity along the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SagittalState {
    /// Position [m].
    pub x: f64,
    /// Velocity [m/s].
    pub xd: f64,
}

/// CoM position and velocity perpendicular to the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LateralState {
    /// Position [m].
    pub y: f64,
    /// Velocity [m/s].
    pub yd: f64,
}

impl SagittalState {
    pub fn new(x: f64, xd: f64) -> Self {
        Self { x, xd }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.xd.is_finite()
    }
}

impl LateralState {
    pub fn new(y: f64, yd: f64) -> Self {
        Self { y, yd }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.yd.is_finite()
    }
}

/// One decoupled plane of the pendulum. Both planes share the same scalar
/// dynamics and differ only in which foot coordinate and torque apply.
pub trait PendulumPlane: Copy {
    fn position(&self) -> f64;
    fn velocity(&self) -> f64;
    fn from_pair(position: f64, velocity: f64) -> Self;
    fn foot(p: &StepParameters) -> f64;
    fn limits(p: &StepParameters) -> TorqueLimits;
    /// CoM height implied by the path surface at this state.
    fn height(&self, p: &StepParameters) -> f64;
}

impl PendulumPlane for SagittalState {
    fn position(&self) -> f64 {
        self.x
    }
    fn velocity(&self) -> f64 {
        self.xd
    }
    fn from_pair(position: f64, velocity: f64) -> Self {
        Self::new(position, velocity)
    }
    fn foot(p: &StepParameters) -> f64 {
        p.foot.x
    }
    fn limits(p: &StepParameters) -> TorqueLimits {
        p.tau_y_limits
    }
    fn height(&self, p: &StepParameters) -> f64 {
        p.surface.height(self.x)
    }
}

impl PendulumPlane for LateralState {
    fn position(&self) -> f64 {
        self.y
    }
    fn velocity(&self) -> f64 {
        self.yd
    }
    fn from_pair(position: f64, velocity: f64) -> Self {
        Self::new(position, velocity)
    }
    fn foot(p: &StepParameters) -> f64 {
        p.foot.y
    }
    fn limits(p: &StepParameters) -> TorqueLimits {
        p.tau_x_limits
    }
    // The surface does not depend on y; report the apex height.
    fn height(&self, p: &StepParameters) -> f64 {
        p.surface.height(p.foot.x)
    }
}

/// Acceleration of either plane without a bounds check.
pub(crate) fn acceleration<S: PendulumPlane>(s: &S, p: &StepParameters, torque: f64) -> f64 {
    let w2 = p.omega * p.omega;
    w2 * (s.position() - S::foot(p)) - w2 / (p.mass * p.gravity) * torque
}

/// `(ẋ, ẍ)` of the sagittal plane under flywheel torque `tau_y`.
pub fn sagittal_derivative(
    s: &SagittalState,
    p: &StepParameters,
    tau_y: f64,
) -> Result<(f64, f64), PendulumError> {
    p.tau_y_limits.check(tau_y)?;
    Ok((s.xd, acceleration(s, p, tau_y)))
}

/// `(ẏ, ÿ)` of the lateral plane under flywheel torque `tau_x`.
pub fn lateral_derivative(
    s: &LateralState,
    p: &StepParameters,
    tau_x: f64,
) -> Result<(f64, f64), PendulumError> {
    p.tau_x_limits.check(tau_x)?;
    Ok((s.yd, acceleration(s, p, tau_x)))
}

/// Torque-free evolution of the pendulum from `(x0, xd0)` over time `t`
/// (negative `t` evolves backward).
pub fn closed_form_state(x0: f64, xd0: f64, x_foot: f64, omega: f64, t: f64) -> SagittalState {
    let (c, s) = ((omega * t).cosh(), (omega * t).sinh());
    let dx = x0 - x_foot;
    SagittalState {
        x: dx * c + xd0 / omega * s + x_foot,
        xd: omega * dx * s + xd0 * c,
    }
}

/// Lateral counterpart of [`closed_form_state`].
pub fn closed_form_lateral(s0: LateralState, y_foot: f64, omega: f64, t: f64) -> LateralState {
    let s = closed_form_state(s0.y, s0.yd, y_foot, omega, t);
    LateralState::new(s.x, s.xd)
}

/// Orbital energy `ẋ² − ω²(x − x_foot)²`, conserved when the torque vanishes.
pub fn orbital_energy(s: &SagittalState, x_foot: f64, omega: f64) -> f64 {
    let dx = s.x - x_foot;
    s.xd * s.xd - omega * omega * dx * dx
}

/// Time for a torque-free state to reach `x = x_foot`.
///
/// Zero if already there. Fails when the state moves away from the foot or
/// lacks the energy to pass over it.
pub fn time_to_apex(s: &SagittalState, x_foot: f64, omega: f64) -> Result<f64, PendulumError> {
    let dx = s.x - x_foot;
    if dx == 0.0 {
        return Ok(0.0);
    }
    // x̃(t) = 0  ⇔  tanh(ωt) = −ω x̃0 / ẋ0
    let ratio = -omega * dx / s.xd;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PendulumError::NoApex {
            energy: orbital_energy(s, x_foot, omega),
        });
    }
    Ok(ratio.atanh() / omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{FootPosition, PathSurface};

    fn params(omega: f64, x_foot: f64) -> StepParameters {
        StepParameters::new(
            omega,
            FootPosition::new(x_foot, 0.0, 0.0),
            PathSurface::flat(1.0),
        )
    }

    #[test]
    fn apex_with_zero_torque_has_no_acceleration() {
        let p = params(3.13, 1.2);
        let (v, a) = sagittal_derivative(&SagittalState::new(1.2, 0.6), &p, 0.0).unwrap();
        assert_eq!(v, 0.6);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn sagittal_acceleration_hand_values() {
        let p = params(3.13, 1.2);
        let (_, a) = sagittal_derivative(&SagittalState::new(1.1, 0.0), &p, 0.0).unwrap();
        assert!((a - -0.97969).abs() < 1e-12);
        let (_, a) = sagittal_derivative(&SagittalState::new(1.2, 0.0), &p, 3.0).unwrap();
        // −3.13² · 3 / 9.81
        assert!((a - -2.995_993_883_792_048).abs() < 1e-12);
    }

    #[test]
    fn torque_outside_limits_is_rejected() {
        let p = params(3.13, 1.2);
        let err = sagittal_derivative(&SagittalState::new(1.2, 0.6), &p, 3.5).unwrap_err();
        assert!(matches!(err, PendulumError::TorqueOutOfBounds { .. }));
        let err = lateral_derivative(&LateralState::new(0.0, 0.0), &p, -3.01).unwrap_err();
        assert!(matches!(err, PendulumError::TorqueOutOfBounds { .. }));
    }

    #[test]
    fn lateral_acceleration_is_odd_in_offset() {
        let p = params(3.13, 0.0);
        let (_, eq) = lateral_derivative(&LateralState::new(0.0, 0.2), &p, 0.0).unwrap();
        assert_eq!(eq, 0.0);
        let (_, a) = lateral_derivative(&LateralState::new(0.1, 0.0), &p, 0.0).unwrap();
        let (_, b) = lateral_derivative(&LateralState::new(-0.1, 0.0), &p, 0.0).unwrap();
        assert!((a - 0.97969).abs() < 1e-12);
        assert_eq!(a, -b);
    }

    #[test]
    fn closed_form_identity_and_foot_start() {
        let s = closed_form_state(1.0, 0.6, 1.2, 3.13, 0.0);
        assert_eq!(s, SagittalState::new(1.0, 0.6));
        let t = 0.37;
        let s = closed_form_state(1.2, 0.6, 1.2, 3.13, t);
        assert!((s.x - (1.2 + 0.6 / 3.13 * (3.13 * t).sinh())).abs() < 1e-15);
    }

    #[test]
    fn time_to_apex_lands_on_the_foot() {
        let s = SagittalState::new(0.9, 1.1);
        let t = time_to_apex(&s, 1.2, 3.13).unwrap();
        let at = closed_form_state(s.x, s.xd, 1.2, 3.13, t);
        assert!((at.x - 1.2).abs() < 1e-12);
        assert!(time_to_apex(&SagittalState::new(0.9, 0.5), 1.2, 3.13).is_err());
        assert!(time_to_apex(&SagittalState::new(1.3, 0.5), 1.2, 3.13).is_err());
    }
}
