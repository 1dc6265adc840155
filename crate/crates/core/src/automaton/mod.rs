//! Hybrid locomotion automaton.
//!
//! Contact modes are the nodes of a small directed graph. Within a mode the
//! CoM follows the pendulum flow of the active step; guards on the
//! continuous state trigger contact switches, and velocity impulses model
//! pushes. [`run_plan`] executes a nominal plan through this machine while
//! invoking the recovery controller after disturbances.

mod run;

pub use run::{
    run_plan, AutomatonConfig, ContactModel, Disturbance, DisturbanceRecord, DpRecovery,
    Failure, GuardKind, HybridTrace, PassiveRecovery, Recovery, RecoveryHooks,
    RecoveryOutcome, RecoveryRequest, StepTransition, TraceRecord, Trigger,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Control, ControllerError};
use crate::manifold::{sigma_apex, ManifoldDescriptor};
use crate::pendulum::{orbital_energy, LateralState, SagittalState, StepParameters};
use crate::planner::PlannerError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutomatonError {
    #[error("illegal mode transition {from:?} -> {to:?}")]
    IllegalTransition { from: DiscreteMode, to: DiscreteMode },
    #[error("unsupported transition {class:?}/{kind:?} with this payload")]
    UnsupportedTransition {
        class: TransitionClass,
        kind: TransitionKind,
    },
    #[error("invalid automaton configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("state diverged at t = {t} s during step {step}")]
    Diverged { t: f64, step: usize },
    #[error("step {step} did not reach its guard within {time} s")]
    Timeout { step: usize, time: f64 },
}

/// Contact mode: single support on either foot, or both feet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteMode {
    LeftSupport,
    RightSupport,
    DualSupport,
}

impl DiscreteMode {
    /// Single-support mode of a foot at lateral position `y`; the walking
    /// centre is `y = 0`.
    pub fn for_foot(y: f64) -> Self {
        if y < 0.0 {
            Self::RightSupport
        } else {
            Self::LeftSupport
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::LeftSupport => "left",
            Self::RightSupport => "right",
            Self::DualSupport => "dual",
        }
    }

    /// Edge of the contact graph. Single supports connect through dual
    /// support; the direct single-to-single edge exists only for
    /// instantaneous contact switches.
    pub fn can_switch_to(self, to: DiscreteMode, instantaneous: bool) -> bool {
        use DiscreteMode::*;
        match (self, to) {
            (LeftSupport, RightSupport) | (RightSupport, LeftSupport) => instantaneous,
            (LeftSupport | RightSupport, DualSupport) | (DualSupport, LeftSupport | RightSupport) => {
                !instantaneous
            }
            _ => false,
        }
    }
}

/// Automaton state `(ζ, q, x)` plus the time stamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub t: f64,
    /// Progression: arc length travelled in the `(x, ẋ/ω)` plane.
    pub zeta: f64,
    pub mode: DiscreteMode,
    pub sagittal: SagittalState,
    pub lateral: LateralState,
}

/// Level set that ends a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Guard {
    Position(f64),
    Velocity(f64),
    Progression(f64),
    /// `σ` of the given manifold reaching `level`.
    Manifold {
        descriptor: ManifoldDescriptor,
        level: f64,
    },
}

impl Guard {
    /// Signed distance to the level set; its zero is the guard.
    pub fn level_function(&self, s: &HybridState) -> f64 {
        match *self {
            Self::Position(x) => s.sagittal.x - x,
            Self::Velocity(v) => s.sagittal.xd - v,
            Self::Progression(z) => s.zeta - z,
            Self::Manifold { descriptor, level } => sigma_apex(&s.sagittal, &descriptor) - level,
        }
    }
}

/// Crossing fraction in `[0, 1]` if the guard's level function changes sign
/// from `prev` to `curr`, located by linear interpolation. A sample exactly
/// on the level set counts as crossed on arrival, not on departure.
pub fn guard_crossed(g: &Guard, prev: &HybridState, curr: &HybridState) -> Option<f64> {
    let a = g.level_function(prev);
    let b = g.level_function(curr);
    let crossed = (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0);
    crossed.then(|| a / (a - b))
}

/// Trigger mechanism of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionClass {
    Autonomous,
    Controlled,
    Timed,
    Disturbed,
}

/// Whether the vector field or the state changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Switching,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// New contact mode with the parameters of its vector field.
    Contact {
        to: DiscreteMode,
        params: StepParameters,
    },
    /// Replacement control.
    Control(Control),
    /// Additive velocity impulse `(Δẋ, Δẏ)`.
    Impulse { dxd: f64, dyd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub class: TransitionClass,
    pub kind: TransitionKind,
    pub payload: Payload,
}

impl TransitionEvent {
    pub fn contact(class: TransitionClass, to: DiscreteMode, params: StepParameters) -> Self {
        Self {
            class,
            kind: TransitionKind::Switching,
            payload: Payload::Contact { to, params },
        }
    }

    pub fn control(kind: TransitionKind, u: Control) -> Self {
        Self {
            class: TransitionClass::Controlled,
            kind,
            payload: Payload::Control(u),
        }
    }

    pub fn impulse(dxd: f64, dyd: f64) -> Self {
        Self {
            class: TransitionClass::Disturbed,
            kind: TransitionKind::Jump,
            payload: Payload::Impulse { dxd, dyd },
        }
    }

    /// Short name for exports.
    pub fn label(&self) -> String {
        let class = match self.class {
            TransitionClass::Autonomous => "autonomous",
            TransitionClass::Controlled => "controlled",
            TransitionClass::Timed => "timed",
            TransitionClass::Disturbed => "disturbed",
        };
        let kind = match self.kind {
            TransitionKind::Switching => "switch",
            TransitionKind::Jump => "jump",
        };
        match self.payload {
            Payload::Contact { to, .. } => format!("{class}-{kind}:{}", to.label()),
            _ => format!("{class}-{kind}"),
        }
    }
}

/// Vector field of the active mode: contact parameters and held control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub params: StepParameters,
    pub control: Control,
}

/// Applies one transition.
///
/// Supported maps are contact switches (autonomous or timed), control
/// updates and disturbance impulses. A contact switch keeps the continuous
/// state and replaces the contact parameters; the control is reset to the
/// new nominal slope with zero torque.
pub fn apply_transition(
    e: &TransitionEvent,
    s: &HybridState,
    field: &Field,
    contact: ContactModel,
) -> Result<(HybridState, Field), AutomatonError> {
    use TransitionClass::*;
    use TransitionKind::*;
    let unsupported = Err(AutomatonError::UnsupportedTransition {
        class: e.class,
        kind: e.kind,
    });
    match (e.class, e.kind, e.payload) {
        (Autonomous | Timed, Switching, Payload::Contact { to, params }) => {
            let instantaneous = contact == ContactModel::Instantaneous;
            if !s.mode.can_switch_to(to, instantaneous) {
                return Err(AutomatonError::IllegalTransition { from: s.mode, to });
            }
            params.validate().map_err(PlannerError::from)?;
            Ok((
                HybridState { mode: to, ..*s },
                Field {
                    params,
                    control: Control::new(params.omega, 0.0),
                },
            ))
        }
        (Controlled, Switching | Jump, Payload::Control(u)) => Ok((*s, Field { control: u, ..*field })),
        (Disturbed, Jump, Payload::Impulse { dxd, dyd }) => {
            Ok((inject_disturbance(s, dxd, dyd), *field))
        }
        _ => unsupported,
    }
}

/// Velocity impulse: positions and everything else unchanged.
pub fn inject_disturbance(s: &HybridState, dxd: f64, dyd: f64) -> HybridState {
    let mut out = *s;
    out.sagittal.xd += dxd;
    out.lateral.yd += dyd;
    out
}

/// Sagittal disturbance patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbancePattern {
    /// Forward push that keeps the side of the asymptote.
    A1,
    /// Forward push carrying the state across the asymptote.
    A2,
    /// Backward push that keeps the direction of motion.
    A3,
    /// Backward push reversing the direction of motion.
    A4,
}

/// Classifies an impulse from the states just before and after it.
///
/// `m` names the pendulum whose asymptotes are tested, usually the step the
/// CoM is heading to: a forward push is [`A2`](DisturbancePattern::A2) when
/// the orbital energy about `m.x_foot` changes sign. A backward push is
/// [`A4`](DisturbancePattern::A4) when `ẋ` changes sign. A zero impulse is
/// reported as `A1`.
pub fn classify_disturbance(
    pre: &SagittalState,
    post: &SagittalState,
    m: &ManifoldDescriptor,
) -> DisturbancePattern {
    if post.xd >= pre.xd {
        let e0 = orbital_energy(pre, m.x_foot, m.omega);
        let e1 = orbital_energy(post, m.x_foot, m.omega);
        if (e0 > 0.0) != (e1 > 0.0) {
            DisturbancePattern::A2
        } else {
            DisturbancePattern::A1
        }
    } else if (pre.xd > 0.0) == (post.xd > 0.0) {
        DisturbancePattern::A3
    } else {
        DisturbancePattern::A4
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{FootPosition, PathSurface};

    fn hs(x: f64, xd: f64) -> HybridState {
        HybridState {
            t: 0.0,
            zeta: 0.0,
            mode: DiscreteMode::LeftSupport,
            sagittal: SagittalState::new(x, xd),
            lateral: LateralState::new(0.0, 0.0),
        }
    }

    #[test]
    fn position_guard_midpoint() {
        let f = guard_crossed(&Guard::Position(1.0), &hs(0.99, 0.5), &hs(1.01, 0.5)).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
        assert_eq!(guard_crossed(&Guard::Position(1.0), &hs(0.97, 0.5), &hs(0.99, 0.5)), None);
        assert_eq!(guard_crossed(&Guard::Position(1.0), &hs(1.0, 0.5), &hs(1.01, 0.5)), None);
    }

    #[test]
    fn manifold_guard_fires_when_sigma_rises_through_level() {
        let m = ManifoldDescriptor::new(0.6, 1.4, 3.13);
        let g = Guard::Manifold {
            descriptor: m,
            level: -5e-4,
        };
        let below = hs(1.2, (m.xdot_squared_at(1.2) - 0.02).sqrt());
        let above = hs(1.2, (m.xdot_squared_at(1.2) - 0.01).sqrt());
        assert!(g.level_function(&below) < 0.0 && g.level_function(&above) > 0.0);
        assert!(guard_crossed(&g, &below, &above).is_some());
        assert!(guard_crossed(&g, &below, &below).is_none());
    }

    #[test]
    fn mode_graph() {
        use DiscreteMode::*;
        assert!(LeftSupport.can_switch_to(RightSupport, true));
        assert!(!LeftSupport.can_switch_to(RightSupport, false));
        assert!(LeftSupport.can_switch_to(DualSupport, false));
        assert!(DualSupport.can_switch_to(RightSupport, false));
        assert!(!DualSupport.can_switch_to(DualSupport, false));
        assert!(!LeftSupport.can_switch_to(LeftSupport, true));
    }

    fn field() -> Field {
        let p = StepParameters::new(3.13, FootPosition::new(0.0, -0.1, 0.0), PathSurface::flat(1.0));
        Field {
            params: p,
            control: Control::new(3.13, 0.0),
        }
    }

    #[test]
    fn contact_switch_keeps_state_and_replaces_field() {
        let s = hs(0.2, 0.8);
        let mut next = field().params;
        next.foot = FootPosition::new(0.4, 0.1, 0.0);
        next.omega = 3.0;
        let e = TransitionEvent::contact(TransitionClass::Autonomous, DiscreteMode::RightSupport, next);
        let (s2, f2) = apply_transition(&e, &s, &field(), ContactModel::Instantaneous).unwrap();
        assert_eq!(s2.sagittal, s.sagittal);
        assert_eq!(s2.mode, DiscreteMode::RightSupport);
        assert_eq!(f2.params, next);
        assert_eq!(f2.control, Control::new(3.0, 0.0));
        let err = apply_transition(&e, &s, &field(), ContactModel::MultiContact).unwrap_err();
        assert!(matches!(err, AutomatonError::IllegalTransition { .. }));
    }

    #[test]
    fn disturbed_jump_adds_the_impulse() {
        let s = hs(0.2, 0.7);
        let (s2, f2) = apply_transition(
            &TransitionEvent::impulse(0.1, 0.0),
            &s,
            &field(),
            ContactModel::Instantaneous,
        )
        .unwrap();
        assert!((s2.sagittal.xd - 0.8).abs() < 1e-15);
        assert_eq!(s2.sagittal.x, 0.2);
        assert_eq!(s2.lateral, s.lateral);
        assert_eq!(f2, field());
    }

    #[test]
    fn unsupported_combinations_are_rejected() {
        let e = TransitionEvent {
            class: TransitionClass::Disturbed,
            kind: TransitionKind::Switching,
            payload: Payload::Impulse { dxd: 0.1, dyd: 0.0 },
        };
        assert!(matches!(
            apply_transition(&e, &hs(0.0, 0.5), &field(), ContactModel::Instantaneous),
            Err(AutomatonError::UnsupportedTransition { .. })
        ));
    }

    #[test]
    fn impulses() {
        let s = hs(0.3, 0.7);
        assert_eq!(inject_disturbance(&s, 0.0, 0.0), s);
        assert!((inject_disturbance(&s, -0.2, 0.0).sagittal.xd - 0.5).abs() < 1e-15);
        let l = inject_disturbance(&s, 0.0, 0.3);
        assert_eq!(l.sagittal, s.sagittal);
        assert_eq!(l.lateral.yd, 0.3);
    }

    #[test]
    fn classification() {
        // Next foot 0.4 m ahead: the nominal state has negative energy about it.
        let next = ManifoldDescriptor::new(0.6, 0.4, 3.13);
        let pre = SagittalState::new(0.1, 0.65);
        assert!(orbital_energy(&pre, 0.4, 3.13) < 0.0);
        let small = SagittalState::new(0.1, 0.75);
        let large = SagittalState::new(0.1, 1.2);
        assert_eq!(classify_disturbance(&pre, &small, &next), DisturbancePattern::A1);
        assert_eq!(classify_disturbance(&pre, &large, &next), DisturbancePattern::A2);
        assert_eq!(
            classify_disturbance(&pre, &SagittalState::new(0.1, 0.4), &next),
            DisturbancePattern::A3
        );
        assert_eq!(
            classify_disturbance(&pre, &SagittalState::new(0.1, -0.1), &next),
            DisturbancePattern::A4
        );
    }
}
