//! Phase-space planning and robust control of non-periodic bipedal gaits on
//! the prismatic inverted pendulum.
//!
//! * [`pendulum`]: continuous dynamics, closed forms, integration, surfaces.
//! * [`manifold`]: the deviation metric `σ`, progression `ζ`, bundles.
//! * [`planner`]: nominal manifolds, step transitions, foot searches, terrain.
//! * [`controller`]: dynamic-programming recovery and foot re-planning.
//! * [`automaton`]: the hybrid walking loop with guards and disturbances.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod manifold;
pub mod pendulum;
pub mod planner;
pub mod controller;
pub mod automaton;
