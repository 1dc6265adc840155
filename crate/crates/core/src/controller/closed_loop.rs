use std::sync::Arc;

use super::dp::{exact_velocity, DpConfig, PolicyTable};
use super::{saturate_control, Control, ControllerError};
use crate::manifold::{sigma_apex, ManifoldDescriptor};
use crate::pendulum::{self, SagittalState, Scheme};

/// Policy lookup wrapped in the boundary-layer saturation.
///
/// Outside `|σ| ≤ ε` the tabulated control is applied. On each entry into the
/// layer the control looked up at that instant is latched and subsequently
/// blended toward the reference as `|σ|` shrinks.
#[derive(Debug, Clone)]
pub struct BoundaryLayer {
    table: Arc<PolicyTable>,
    manifold: ManifoldDescriptor,
    reference: Control,
    epsilon: f64,
    latched: Option<Control>,
}

impl BoundaryLayer {
    pub fn new(table: Arc<PolicyTable>, cfg: &DpConfig, epsilon: f64) -> Self {
        Self {
            table,
            manifold: cfg.manifold(),
            reference: cfg.reference(),
            epsilon,
            latched: None,
        }
    }

    pub fn manifold(&self) -> &ManifoldDescriptor {
        &self.manifold
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Control to hold over the next integration step, with the current `σ`.
    pub fn command(&mut self, s: &SagittalState) -> (Control, f64) {
        let sigma = sigma_apex(s, &self.manifold);
        let policy = self.table.lookup(s);
        if sigma.abs() > self.epsilon {
            self.latched = None;
            return (policy, sigma);
        }
        let entry = *self.latched.get_or_insert(policy);
        (
            saturate_control(sigma, self.epsilon, policy, entry, self.reference),
            sigma,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopSample {
    pub t: f64,
    pub state: SagittalState,
    /// Control held from this sample to the next.
    pub control: Control,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Samples every `dt`, then one final sample exactly at the end position.
    pub samples: Vec<ClosedLoopSample>,
    /// Index of the first sample inside the boundary layer.
    pub entered: Option<usize>,
}

impl Rollout {
    pub fn terminal(&self) -> &ClosedLoopSample {
        self.samples.last().expect("a rollout has at least one sample")
    }

    /// Whether every sample from the first entry on stays in the layer.
    pub fn remains_inside(&self, epsilon: f64) -> bool {
        match self.entered {
            Some(i) => self.samples[i..].iter().all(|s| s.sigma.abs() <= epsilon),
            None => false,
        }
    }

    /// Sign changes of the torque from the first entry on; zeros are skipped.
    pub fn torque_sign_changes_after_entry(&self) -> usize {
        let Some(i) = self.entered else { return 0 };
        let mut last = 0.0;
        let mut changes = 0;
        for s in &self.samples[i..] {
            let sign = if s.control.tau_y > 0.0 {
                1.0
            } else if s.control.tau_y < 0.0 {
                -1.0
            } else {
                continue;
            };
            if last != 0.0 && sign != last {
                changes += 1;
            }
            last = sign;
        }
        changes
    }
}

/// Longest simulated time before a rollout is abandoned [s].
const MAX_TIME: f64 = 20.0;

/// Simulates the saturated policy from `start` until `x` reaches the last
/// stage node. The last piece is evolved exactly so the final sample lies on
/// the transition position.
pub fn rollout(
    cfg: &DpConfig,
    table: Arc<PolicyTable>,
    start: SagittalState,
    epsilon: f64,
    dt: f64,
) -> Result<Rollout, ControllerError> {
    let x_end = cfg.stage.value(cfg.stage.count() - 1);
    let mut layer = BoundaryLayer::new(table, cfg, epsilon);
    let mut samples = Vec::new();
    let mut entered = None;
    let mut s = start;
    let mut t = 0.0;
    let mut k = 0usize;
    loop {
        if !(s.xd > 0.0) || !s.is_finite() {
            return Err(ControllerError::Stalled { x: s.x });
        }
        let (u, sigma) = layer.command(&s);
        if entered.is_none() && sigma.abs() <= epsilon {
            entered = Some(samples.len());
        }
        samples.push(ClosedLoopSample {
            t,
            state: s,
            control: u,
            sigma,
        });
        if s.x >= x_end {
            break;
        }
        if t > MAX_TIME {
            return Err(ControllerError::Timeout {
                target: x_end,
                time: MAX_TIME,
            });
        }
        let p = cfg.step_parameters(u.omega);
        let next = pendulum::step(&s, &p, u.tau_y, dt, Scheme::Rk4);
        if next.x >= x_end {
            let x_eq = cfg.x_foot + u.tau_y / (cfg.mass * cfg.gravity);
            let xd = exact_velocity(s.x, s.xd, x_end, u.omega, x_eq)
                .ok_or(ControllerError::Stalled { x: s.x })?;
            let fin = SagittalState::new(x_end, xd);
            let sigma = sigma_apex(&fin, layer.manifold());
            if entered.is_none() && sigma.abs() <= epsilon {
                entered = Some(samples.len());
            }
            // Time of the partial step by linear interpolation in x.
            let frac = (x_end - s.x) / (next.x - s.x);
            samples.push(ClosedLoopSample {
                t: t + frac * dt,
                state: fin,
                control: u,
                sigma,
            });
            break;
        }
        s = next;
        k += 1;
        t = k as f64 * dt;
    }
    Ok(Rollout { samples, entered })
}
