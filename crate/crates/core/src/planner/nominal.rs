use serde::{Deserialize, Serialize};

use super::curve::PhaseCurve;
use super::terrain::TerrainSpec;
use super::transition::{find_transition, TransitionPoint};
use super::{ApexKeyframe, PlannerError};
use crate::manifold::ManifoldDescriptor;
use crate::pendulum::{
    self, omega_from_surface, SagittalState, Scheme, StepParameters, TorqueLimits, GRAVITY,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NominalOptions {
    pub gravity: f64,
    pub mass: f64,
    pub tau_y_limits: TorqueLimits,
    pub tau_x_limits: TorqueLimits,
    /// Integration step for sampling manifolds [s].
    pub dt: f64,
    /// Extra distance integrated past each neighbouring foot [m].
    pub window_margin: f64,
}

impl Default for NominalOptions {
    fn default() -> Self {
        Self {
            gravity: GRAVITY,
            mass: 1.0,
            tau_y_limits: TorqueLimits::symmetric(3.0),
            tau_x_limits: TorqueLimits::symmetric(3.0),
            dt: pendulum::DEFAULT_DT,
            window_margin: 0.05,
        }
    }
}

/// Sampled torque-free manifold of one step together with its fitted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct StepManifold {
    pub descriptor: ManifoldDescriptor,
    /// Samples ordered by increasing `x`.
    pub samples: Vec<SagittalState>,
    pub curve: PhaseCurve,
}

impl StepManifold {
    /// Integrates backward and forward from the apex until the CoM leaves
    /// `[x_foot − behind, x_foot + ahead]`.
    pub fn generate(
        params: &StepParameters,
        xdot_apex: f64,
        behind: f64,
        ahead: f64,
        dt: f64,
    ) -> Result<Self, PlannerError> {
        if !(xdot_apex > 0.0 && xdot_apex.is_finite()) {
            return Err(PlannerError::InvalidInput(format!(
                "apex velocity must be positive for forward walking, got {xdot_apex}"
            )));
        }
        if !(dt > 0.0) || !(behind > 0.0) || !(ahead > 0.0) {
            return Err(PlannerError::InvalidInput(
                "manifold window and step must be positive".into(),
            ));
        }
        params.validate()?;
        let x_foot = params.foot.x;
        let apex = SagittalState::new(x_foot, xdot_apex);
        let limit = ((behind.max(ahead) / xdot_apex) / dt).ceil() as usize + 10;

        let mut backward = Vec::new();
        let mut s = apex;
        while s.x > x_foot - behind {
            s = pendulum::step(&s, params, 0.0, -dt, Scheme::Rk4);
            backward.push(s);
            if backward.len() > limit {
                return Err(PlannerError::Stalled { target: x_foot - behind });
            }
        }
        let mut samples: Vec<SagittalState> = backward.into_iter().rev().collect();
        samples.push(apex);
        let mut s = apex;
        let mut n = 0;
        while s.x < x_foot + ahead {
            s = pendulum::step(&s, params, 0.0, dt, Scheme::Rk4);
            samples.push(s);
            n += 1;
            if n > limit {
                return Err(PlannerError::Stalled { target: x_foot + ahead });
            }
        }
        Self::from_samples(
            ManifoldDescriptor::new(xdot_apex, x_foot, params.omega),
            params,
            samples,
        )
    }

    /// Fits the curve through samples produced under zero torque.
    pub fn from_samples(
        descriptor: ManifoldDescriptor,
        params: &StepParameters,
        samples: Vec<SagittalState>,
    ) -> Result<Self, PlannerError> {
        let w2 = params.omega * params.omega;
        let xs = samples.iter().map(|s| s.x).collect();
        let values = samples.iter().map(|s| s.xd * s.xd).collect();
        let slopes = samples
            .iter()
            .map(|s| 2.0 * w2 * (s.x - params.foot.x))
            .collect();
        let curve = PhaseCurve::new(xs, values, slopes).ok_or_else(|| {
            PlannerError::InvalidInput("manifold samples must be strictly increasing in x".into())
        })?;
        Ok(Self {
            descriptor,
            samples,
            curve,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.curve.x_min()
    }

    pub fn x_max(&self) -> f64 {
        self.curve.x_max()
    }

    /// Forward velocity of the fitted manifold at `x`.
    pub fn xdot_at(&self, x: f64) -> Option<f64> {
        self.curve.eval(x).filter(|w| *w >= 0.0).map(f64::sqrt)
    }

    /// Arc length in the `(x, ẋ/ω)` plane between two positions along the curve.
    pub fn arc_length(&self, from: f64, to: f64) -> Option<f64> {
        let (lo, hi, sign) = if to >= from { (from, to, 1.0) } else { (to, from, -1.0) };
        let w = self.descriptor.omega;
        let mut points = vec![lo];
        points.extend(self.curve.knots().iter().copied().filter(|&x| x > lo && x < hi));
        points.push(hi);
        let mut total = 0.0;
        let mut prev = (lo, self.xdot_at(lo)? / w);
        for &x in &points[1..] {
            let cur = (x, self.xdot_at(x)? / w);
            total += (cur.0 - prev.0).hypot(cur.1 - prev.1);
            prev = cur;
        }
        Some(sign * total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStep {
    pub params: StepParameters,
    pub keyframe: ApexKeyframe,
    pub manifold: StepManifold,
}

/// Nominal multi-step plan: one manifold per step and one transition per
/// pair of adjacent steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalPlan {
    pub steps: Vec<PlannedStep>,
    pub transitions: Vec<TransitionPoint>,
    pub options: NominalOptions,
}

impl NominalPlan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Window integrated around foot `q`: back to the previous foot and
    /// ahead to the next one, plus a margin.
    fn window(feet: &[f64], q: usize, margin: f64) -> (f64, f64) {
        let prev = (q > 0).then(|| feet[q] - feet[q - 1]);
        let next = feet.get(q + 1).map(|x| x - feet[q]);
        let fallback = prev.or(next).unwrap_or(0.5);
        (
            prev.unwrap_or(fallback) + margin,
            next.unwrap_or(fallback) + margin,
        )
    }

    /// Replaces the sagittal foot of step `q` and regenerates the affected
    /// manifold and transitions. The CoM apex height above the foot is kept.
    pub fn replan_foot(&mut self, q: usize, x_foot: f64) -> Result<(), PlannerError> {
        let step = self
            .steps
            .get_mut(q)
            .ok_or_else(|| PlannerError::InvalidInput(format!("no step {q}")))?;
        let z_apex = step.params.surface.apex_height(&step.params.foot);
        step.params.foot.x = x_foot;
        step.params.surface = pendulum::PathSurface::through_apex(
            step.params.surface.slope,
            &step.params.foot,
            z_apex,
        );
        self.rebuild_from(q)
    }

    fn rebuild_from(&mut self, q: usize) -> Result<(), PlannerError> {
        let feet: Vec<f64> = self.steps.iter().map(|s| s.params.foot.x).collect();
        if feet.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PlannerError::InvalidInput(
                "foot positions must be strictly increasing".into(),
            ));
        }
        let lo = q.saturating_sub(1);
        let hi = (q + 1).min(self.steps.len() - 1);
        for k in lo..=hi {
            let (behind, ahead) = Self::window(&feet, k, self.options.window_margin);
            let s = &self.steps[k];
            let manifold = StepManifold::generate(
                &s.params,
                s.keyframe.xdot_apex,
                behind,
                ahead,
                self.options.dt,
            )?;
            self.steps[k].manifold = manifold;
        }
        for k in lo..hi {
            self.transitions[k] = transition_between(&self.steps, k)?;
        }
        Ok(())
    }
}

fn transition_between(steps: &[PlannedStep], q: usize) -> Result<TransitionPoint, PlannerError> {
    find_transition(&steps[q].manifold, &steps[q + 1].manifold).map_err(|e| match e {
        PlannerError::NoTransition { .. } | PlannerError::DegenerateTransition => {
            PlannerError::Infeasible {
                from: q,
                to: q + 1,
                reason: e.to_string(),
            }
        }
        other => other,
    })
}

/// Generates the torque-free manifold of every step and the transitions
/// between them.
pub fn generate_nominal(
    terrain: &TerrainSpec,
    keyframes: &[ApexKeyframe],
    opts: &NominalOptions,
) -> Result<NominalPlan, PlannerError> {
    terrain.validate()?;
    if keyframes.len() != terrain.steps.len() {
        return Err(PlannerError::InvalidInput(format!(
            "{} keyframes for {} terrain steps",
            keyframes.len(),
            terrain.steps.len()
        )));
    }
    let feet: Vec<f64> = terrain.steps.iter().map(|s| s.foot.x).collect();
    let mut steps = Vec::with_capacity(feet.len());
    for (q, (ts, kf)) in terrain.steps.iter().zip(keyframes).enumerate() {
        if !(kf.z_apex > 0.0) {
            return Err(PlannerError::Geometry { z_apex: kf.z_apex });
        }
        let surface_apex = ts.surface.apex_height(&ts.foot);
        if (surface_apex - kf.z_apex).abs() > 1e-9 * kf.z_apex.max(1.0) {
            return Err(PlannerError::InvalidInput(format!(
                "step {q}: keyframe apex height {} m disagrees with the surface ({} m)",
                kf.z_apex, surface_apex
            )));
        }
        let omega = omega_from_surface(&ts.surface, &ts.foot, opts.gravity)?;
        let params = StepParameters {
            omega,
            foot: ts.foot,
            surface: ts.surface,
            mass: opts.mass,
            gravity: opts.gravity,
            tau_y_limits: opts.tau_y_limits,
            tau_x_limits: opts.tau_x_limits,
        };
        let (behind, ahead) = NominalPlan::window(&feet, q, opts.window_margin);
        let manifold = StepManifold::generate(&params, kf.xdot_apex, behind, ahead, opts.dt)?;
        steps.push(PlannedStep {
            params,
            keyframe: *kf,
            manifold,
        });
    }
    let transitions = (0..steps.len().saturating_sub(1))
        .map(|q| transition_between(&steps, q))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NominalPlan {
        steps,
        transitions,
        options: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::sigma_apex;
    use crate::planner::{keyframes_for_terrain, TerrainParams};
    use crate::planner::terrain::flat_terrain;

    #[test]
    fn single_step_passes_through_its_apex() {
        let terrain = flat_terrain(1, 0.4, 1.0);
        let plan =
            generate_nominal(&terrain, &[ApexKeyframe::new(0.6, 1.0)], &Default::default()).unwrap();
        let m = &plan.steps[0].manifold;
        assert_eq!(m.xdot_at(0.0).unwrap(), 0.6);
        assert!(plan.transitions.is_empty());
    }

    #[test]
    fn samples_lie_on_the_quadratic_manifold() {
        let terrain = flat_terrain(3, 0.4, 1.0);
        let kf = vec![ApexKeyframe::new(0.55, 1.0), ApexKeyframe::new(0.6, 1.0), ApexKeyframe::new(0.65, 1.0)];
        let plan = generate_nominal(&terrain, &kf, &Default::default()).unwrap();
        for step in &plan.steps {
            let d = step.manifold.descriptor;
            for s in &step.manifold.samples {
                let lhs = s.xd * s.xd;
                assert!((lhs - d.xdot_squared_at(s.x)).abs() <= 1e-8, "{lhs}");
                assert!(sigma_apex(s, &d).abs() <= 1e-8 * d.sigma_scale());
            }
        }
    }

    #[test]
    fn seven_steps_give_valley_profiles() {
        let terrain = crate::planner::generate_terrain(&TerrainParams {
            n_steps: 7,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let kf = keyframes_for_terrain(&terrain);
        let plan = generate_nominal(&terrain, &kf, &Default::default()).unwrap();
        assert_eq!(plan.transitions.len(), 6);
        for (q, step) in plan.steps.iter().enumerate() {
            let lo = if q == 0 { step.manifold.x_min() } else { plan.transitions[q - 1].x_trans };
            let hi = plan.transitions.get(q).map_or(step.manifold.x_max(), |t| t.x_trans);
            let inside: Vec<_> = step
                .manifold
                .samples
                .iter()
                .filter(|s| s.x >= lo && s.x <= hi)
                .collect();
            let min = inside.iter().min_by(|a, b| a.xd.total_cmp(&b.xd)).unwrap();
            assert!((min.x - step.params.foot.x).abs() < 2e-3, "step {q}");
            assert!(inside.first().unwrap().xd > min.xd && inside.last().unwrap().xd > min.xd);
        }
    }

    #[test]
    fn keyframe_errors() {
        let terrain = flat_terrain(2, 0.4, 1.0);
        let err = generate_nominal(&terrain, &[ApexKeyframe::new(0.6, 1.0)], &Default::default());
        assert!(matches!(err, Err(PlannerError::InvalidInput(_))));
        let err = generate_nominal(
            &terrain,
            &[ApexKeyframe::new(0.6, 1.0), ApexKeyframe::new(0.6, -1.0)],
            &Default::default(),
        );
        assert!(matches!(err, Err(PlannerError::Geometry { .. })));
    }

    #[test]
    fn replanned_foot_moves_the_transitions() {
        let terrain = flat_terrain(3, 0.4, 1.0);
        let kf = vec![ApexKeyframe::new(0.6, 1.0); 3];
        let mut plan = generate_nominal(&terrain, &kf, &Default::default()).unwrap();
        assert!((plan.transitions[0].x_trans - 0.2).abs() < 1e-9);
        plan.replan_foot(1, 0.5).unwrap();
        assert!((plan.transitions[0].x_trans - 0.25).abs() < 1e-9);
        assert!((plan.transitions[1].x_trans - 0.65).abs() < 1e-9);
        assert!((plan.steps[1].params.surface.apex_height(&plan.steps[1].params.foot) - 1.0).abs() < 1e-12);
    }
}
