use serde::{Deserialize, Serialize};

use super::nominal::{NominalOptions, StepManifold};
use super::transition::find_transition;
use super::{ApexKeyframe, PlannerError};
use crate::pendulum::{SagittalState, StepParameters};

/// Controls held over the remainder of a step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepControls {
    /// Sagittal flywheel torque [N·m].
    pub tau_y: f64,
}

/// Geometry and planned apex of the step being entered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NextStep {
    pub params: StepParameters,
    pub planned: ApexKeyframe,
}

/// State reached at a target position together with the time taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub state: SagittalState,
    pub elapsed: f64,
}

/// Evolves the sagittal state to `x_target` under constant torque, exactly.
///
/// With constant `ω` and `τ` the motion is a pure saddle about the shifted
/// equilibrium `x_s = x_foot + τ/(m g)`, so `ẋ² − ω²(x − x_s)²` is conserved
/// and the crossing time follows from the exponential modes. Fails with
/// [`PlannerError::Stalled`] if the CoM stops before reaching the target.
pub fn advance_to_position(
    state: SagittalState,
    params: &StepParameters,
    tau_y: f64,
    x_target: f64,
) -> Result<Advance, PlannerError> {
    params.validate()?;
    params.tau_y_limits.check(tau_y)?;
    if !(state.xd > 0.0) || x_target < state.x {
        return Err(PlannerError::Stalled { target: x_target });
    }
    let w = params.omega;
    let xs = params.foot.x + tau_y / (params.mass * params.gravity);
    let energy = state.xd * state.xd - w * w * (state.x - xs).powi(2);
    let w2_at = |x: f64| energy + w * w * (x - xs).powi(2);
    // Slowest point of the interval is the one nearest the equilibrium.
    let slowest = xs.clamp(state.x, x_target);
    if !(w2_at(slowest) > 0.0) {
        return Err(PlannerError::Stalled { target: x_target });
    }
    let xd = w2_at(x_target).sqrt();
    let (u0, u1) = (state.x - xs, x_target - xs);
    let ahead = u0 + state.xd / w;
    let elapsed = if ahead > 0.0 {
        ((u1 + xd / w) / ahead).ln() / w
    } else {
        -((u1 - xd / w) / (u0 - state.xd / w)).ln() / w
    };
    Ok(Advance {
        state: SagittalState::new(x_target, xd),
        elapsed,
    })
}

/// Apex-to-apex map of one step.
///
/// Starting from the apex of the current step, the CoM evolves under the
/// given torque until the nominal transition position (the crossing of the
/// two torque-free manifolds), switches to the next contact, and coasts to
/// the next apex. Returns the realized apex velocity and the apex height of
/// the next geometry.
pub fn progression_map(
    current: &StepParameters,
    apex: ApexKeyframe,
    controls: StepControls,
    next: &NextStep,
    opts: &NominalOptions,
) -> Result<ApexKeyframe, PlannerError> {
    let gap = next.params.foot.x - current.foot.x;
    if !(gap > 0.0) {
        return Err(PlannerError::InvalidInput(
            "next foot must lie ahead of the current one".into(),
        ));
    }
    let reach = gap + opts.window_margin;
    let mq = StepManifold::generate(current, apex.xdot_apex, reach, reach, opts.dt)?;
    let mq1 = StepManifold::generate(&next.params, next.planned.xdot_apex, reach, reach, opts.dt)?;
    let t = find_transition(&mq, &mq1)?;
    let start = SagittalState::new(current.foot.x, apex.xdot_apex);
    let at_switch = advance_to_position(start, current, controls.tau_y, t.x_trans)?;
    let at_apex = advance_to_position(at_switch.state, &next.params, 0.0, next.params.foot.x)?;
    Ok(ApexKeyframe::new(
        at_apex.state.xd,
        next.params.surface.apex_height(&next.params.foot),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{closed_form_state, FootPosition, PathSurface};

    fn flat(x_foot: f64) -> StepParameters {
        StepParameters::new(3.13, FootPosition::new(x_foot, 0.0, 0.0), PathSurface::flat(1.0))
    }

    #[test]
    fn exact_advance_matches_closed_form() {
        let p = flat(0.2);
        let s0 = SagittalState::new(0.0, 0.9);
        let adv = advance_to_position(s0, &p, 0.0, 0.35).unwrap();
        let back = closed_form_state(s0.x, s0.xd, 0.2, 3.13, adv.elapsed);
        assert!((back.x - 0.35).abs() < 1e-12);
        assert!((back.xd - adv.state.xd).abs() < 1e-12);
    }

    #[test]
    fn torque_shifts_the_equilibrium() {
        let p = flat(0.0);
        let s0 = SagittalState::new(-0.1, 0.6);
        let adv = advance_to_position(s0, &p, 0.3, 0.1).unwrap();
        let xs: f64 = 0.3 / 9.81;
        let e0 = 0.36 - 3.13f64.powi(2) * (-0.1 - xs).powi(2);
        let e1 = adv.state.xd.powi(2) - 3.13f64.powi(2) * (0.1 - xs).powi(2);
        assert!((e0 - e1).abs() < 1e-12);
        assert!(adv.elapsed > 0.0);
    }

    #[test]
    fn stalls_short_of_the_target() {
        let p = flat(0.0);
        let err = advance_to_position(SagittalState::new(-0.3, 0.5), &p, 0.0, 0.3).unwrap_err();
        assert_eq!(err, PlannerError::Stalled { target: 0.3 });
    }

    #[test]
    fn symmetric_steps_preserve_apex_velocity() {
        let next = NextStep {
            params: flat(0.4),
            planned: ApexKeyframe::new(0.6, 1.0),
        };
        let out = progression_map(
            &flat(0.0),
            ApexKeyframe::new(0.6, 1.0),
            StepControls::default(),
            &next,
            &NominalOptions::default(),
        )
        .unwrap();
        assert!((out.xdot_apex - 0.6).abs() < 1e-9);
        assert_eq!(out.z_apex, 1.0);
    }

    #[test]
    fn positive_torque_slows_the_next_apex() {
        let next = NextStep {
            params: flat(0.4),
            planned: ApexKeyframe::new(0.6, 1.0),
        };
        let run = |tau| {
            progression_map(
                &flat(0.0),
                ApexKeyframe::new(0.6, 1.0),
                StepControls { tau_y: tau },
                &next,
                &NominalOptions::default(),
            )
            .unwrap()
            .xdot_apex
        };
        assert!(run(0.1) < 0.6 && run(-0.1) > 0.6);
    }
}
