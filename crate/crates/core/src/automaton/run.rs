use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    apply_transition, classify_disturbance, AutomatonError, DiscreteMode, DisturbancePattern,
    Field, Guard, HybridState, TransitionClass, TransitionEvent, guard_crossed,
};
use crate::controller::{
    cell_recoverable, replan_foot, solve_dp, BoundaryLayer, Control, ControlAxis,
    ControllerError, DpConfig, GridAxis,
};
use crate::manifold::{sensitivity_norm, sigma_apex, ManifoldDescriptor};
use crate::pendulum::{
    self, closed_form_lateral, closed_form_state, time_to_apex, FootPosition, LateralState,
    SagittalState, Scheme, StepParameters, DEFAULT_DT,
};
use crate::planner::{
    advance_to_position, fit_multicontact, lateral_foot_search, Boundary, LateralSearch,
    NominalPlan, PlannerError, DEFAULT_DUAL_FRACTION,
};

/// Guard family used to end each step. Every variant passes through the
/// nominal transition point, except the manifold guard which fires on the
/// `−ε` isoline of the next step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    Position,
    Velocity,
    Progression,
    #[default]
    Manifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactModel {
    /// Single support switches directly to the other foot.
    #[default]
    Instantaneous,
    /// A quintic dual-support segment joins the two single-support flows.
    MultiContact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutomatonConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub guard: GuardKind,
    pub contact: ContactModel,
    /// Share of the step time spent in dual support.
    pub dual_fraction: f64,
    /// Boundary-layer half width in `σ` units.
    pub epsilon: f64,
    /// Lateral feet may move this far from their planned offset to the
    /// CoM's lateral drift [m].
    pub lateral_range: f64,
    pub lateral_iterations: usize,
    /// Target `|ẏ|` at the apex [m/s].
    pub lateral_tolerance: f64,
    /// A step that has not reached its guard after this long fails [s].
    pub max_step_time: f64,
    /// Largest lateral CoM distance from the stance foot before the run is
    /// declared diverged [m].
    pub max_lateral_offset: f64,
    /// Lateral CoM state at the first apex.
    pub initial_lateral: LateralState,
}

impl Default for AutomatonConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            scheme: Scheme::Rk4,
            guard: GuardKind::Manifold,
            contact: ContactModel::Instantaneous,
            dual_fraction: DEFAULT_DUAL_FRACTION,
            epsilon: 5e-4,
            lateral_range: 0.15,
            lateral_iterations: 20,
            lateral_tolerance: 1e-4,
            max_step_time: 10.0,
            max_lateral_offset: 1.0,
            initial_lateral: LateralState::new(0.0, 0.0),
        }
    }
}

impl AutomatonConfig {
    pub fn validate(&self) -> Result<(), AutomatonError> {
        let bad = |m: &str| Err(AutomatonError::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.dual_fraction > 0.0 && self.dual_fraction < 1.0) {
            return bad("dual_fraction must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.lateral_range >= 0.0) || self.lateral_iterations == 0 {
            return bad("lateral search needs a non-negative range and at least one iteration");
        }
        if !(self.lateral_tolerance > 0.0 && self.max_step_time > 0.0 && self.max_lateral_offset > 0.0) {
            return bad("lateral_tolerance, max_step_time and max_lateral_offset must be positive");
        }
        if !(self.initial_lateral.is_finite()) {
            return bad("initial lateral state must be finite");
        }
        Ok(())
    }
}

/// When a scheduled push fires within its step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// First sample with `x` at or beyond this position [m].
    Position(f64),
    /// First sample whose progression since the start of the step reaches
    /// this value.
    Progression(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub step: usize,
    pub trigger: Trigger,
    #[serde(default)]
    pub dxd: f64,
    #[serde(default)]
    pub dyd: f64,
}

/// What the recovery controller is asked after a sagittal push.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryRequest {
    pub step: usize,
    pub state: SagittalState,
    /// Nominal contact of the step.
    pub params: StepParameters,
    pub xdot_apex: f64,
    /// Nominal transition position, the end of the recovery horizon.
    pub x_trans: f64,
    pub epsilon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub layer: BoundaryLayer,
    /// Whether the quantized disturbed state lies in the recoverability mask.
    pub recoverable: bool,
}

/// Continuous recovery used by [`run_plan`] after sagittal pushes.
pub trait RecoveryHooks {
    /// `None` leaves the CoM uncontrolled for the rest of the step.
    fn recover(&mut self, req: &RecoveryRequest) -> Result<Option<Recovery>, ControllerError>;
}

/// No recovery: pushes are only recorded.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassiveRecovery;

impl RecoveryHooks for PassiveRecovery {
    fn recover(&mut self, _: &RecoveryRequest) -> Result<Option<Recovery>, ControllerError> {
        Ok(None)
    }
}

/// Solves the DP over the rest of the disturbed step and looks up the
/// recoverability of the quantized state.
///
/// Weights, resolutions, state range and torque levels come from the
/// template. The `ω` grid keeps the template's offsets from its reference,
/// re-centred on the slope of the disturbed step.
#[derive(Debug, Clone, Default)]
pub struct DpRecovery {
    pub template: DpConfig,
}

impl DpRecovery {
    pub fn new(template: DpConfig) -> Self {
        Self { template }
    }

    /// Problem solved for a request. The last stage node is the transition.
    pub fn config_for(&self, req: &RecoveryRequest) -> DpConfig {
        let t = &self.template;
        let res = t.stage.res;
        let k = ((req.x_trans - req.state.x) / res).ceil().max(1.0);
        let w = req.params.omega;
        DpConfig {
            stage: GridAxis::new(req.x_trans - k * res, req.x_trans, res),
            omega: ControlAxis::new(
                w + (t.omega.min - t.omega_ref),
                w + (t.omega.max - t.omega_ref),
                t.omega.levels,
            ),
            omega_ref: w,
            x_foot: req.params.foot.x,
            xdot_apex: req.xdot_apex,
            mass: req.params.mass,
            gravity: req.params.gravity,
            ..t.clone()
        }
    }
}

impl RecoveryHooks for DpRecovery {
    fn recover(&mut self, req: &RecoveryRequest) -> Result<Option<Recovery>, ControllerError> {
        let cfg = self.config_for(req);
        let table = Arc::new(solve_dp(&cfg)?);
        let top = cfg.state.value(cfg.state.count() - 1);
        let half = 0.5 * cfg.state.res;
        let in_grid = req.state.xd >= cfg.state.min - half && req.state.xd <= top + half;
        let recoverable = in_grid
            && cell_recoverable(
                &cfg,
                table.clone(),
                cfg.stage.nearest(req.state.x),
                cfg.state.nearest(req.state.xd),
                req.epsilon,
                req.dt,
            );
        Ok(Some(Recovery {
            layer: BoundaryLayer::new(table, &cfg, req.epsilon),
            recoverable,
        }))
    }
}

/// One sample of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub zeta: f64,
    /// Step whose contact is active (the incoming one during dual support).
    pub step: usize,
    pub mode: DiscreteMode,
    pub sagittal: SagittalState,
    pub lateral: LateralState,
    pub z: f64,
    /// Control held from this sample to the next.
    pub control: Control,
    /// Deviation from the nominal manifold of `step`.
    pub sigma: f64,
    pub events: Vec<TransitionEvent>,
}

impl TraceRecord {
    pub fn hybrid_state(&self) -> HybridState {
        HybridState {
            t: self.t,
            zeta: self.zeta,
            mode: self.mode,
            sagittal: self.sagittal,
            lateral: self.lateral,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTransition {
    pub from: usize,
    pub to: usize,
    /// Index of the first record past the guard.
    pub record: usize,
    pub guard: Guard,
    /// Location of the crossing between the two samples.
    pub fraction: f64,
    pub state: SagittalState,
    /// Contact used for the new step, lateral search included.
    pub foot: FootPosition,
    pub dual_duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryOutcome {
    /// No sagittal action: lateral push, last step, or no controller.
    Passive,
    /// Continuous control only; the feet are unchanged.
    Continuous,
    /// The next foot was moved to this sagittal position.
    Replanned { x_foot: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceRecord {
    pub step: usize,
    /// Index of the post-impulse record.
    pub record: usize,
    pub t: f64,
    pub zeta: f64,
    pub dxd: f64,
    pub dyd: f64,
    pub pattern: DisturbancePattern,
    /// `σ` right after the impulse.
    pub sigma: f64,
    pub recoverable: Option<bool>,
    pub outcome: RecoveryOutcome,
    /// Sensitivity norm from the push to the end of its step.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub t: f64,
    pub step: usize,
    pub error: AutomatonError,
}

/// Output of [`run_plan`]; complete up to the failure if one occurred.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridTrace {
    pub records: Vec<TraceRecord>,
    pub transitions: Vec<StepTransition>,
    pub disturbances: Vec<DisturbanceRecord>,
    pub failure: Option<Failure>,
}

impl HybridTrace {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn max_abs_sigma(&self) -> f64 {
        self.records.iter().map(|r| r.sigma.abs()).fold(0.0, f64::max)
    }

    /// Largest `|y|` reached during each step.
    pub fn lateral_excursion_by_step(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.records {
            if out.len() <= r.step {
                out.resize(r.step + 1, 0.0);
            }
            out[r.step] = out[r.step].max(r.lateral.y.abs());
        }
        out
    }

    pub fn replan_count(&self) -> usize {
        self.disturbances
            .iter()
            .filter(|d| matches!(d.outcome, RecoveryOutcome::Replanned { .. }))
            .count()
    }
}

/// Walks a nominal plan through the hybrid automaton.
///
/// The run starts at the apex of the first step and ends at the apex of the
/// last one. Each step flows under its contact until the configured guard
/// is crossed, then the lateral foot of the next step is searched and the
/// contact switches, directly or through a dual-support segment. Scheduled
/// pushes are applied as velocity jumps; after a sagittal push the hooks
/// provide a recovery policy, and when the quantized state is unrecoverable
/// the next foot is re-planned so that coasting reaches its planned apex
/// velocity, with a position guard at the nominal transition.
pub fn run_plan(
    plan: &NominalPlan,
    cfg: &AutomatonConfig,
    disturbances: &[Disturbance],
    hooks: &mut dyn RecoveryHooks,
) -> HybridTrace {
    let mut trace = HybridTrace::default();
    let mut sim = Sim {
        plan: plan.clone(),
        cfg,
        schedule: disturbances,
        fired: vec![false; disturbances.len()],
    };
    let result = cfg.validate().and_then(|_| sim.run(&mut trace, hooks));
    if let Err(error) = result {
        let (t, step) = trace.records.last().map_or((0.0, 0), |r| (r.t, r.step));
        log::warn!("run stopped at t = {t:.3} s in step {step}: {error}");
        trace.failure = Some(Failure { t, step, error });
    }
    trace
}

struct Sim<'a> {
    plan: NominalPlan,
    cfg: &'a AutomatonConfig,
    schedule: &'a [Disturbance],
    fired: Vec<bool>,
}

/// Per-step bookkeeping while in single support.
struct StepRun {
    q: usize,
    field: Field,
    guard: Option<Guard>,
    armed: bool,
    recovery: Option<BoundaryLayer>,
    zeta_entry: f64,
    t_entry: f64,
    /// `(ζ, σ)` since the start of the step.
    sigma_log: Vec<(f64, f64)>,
    /// `(disturbance index, sigma_log index)` of pushes in this step.
    pushes: Vec<(usize, usize)>,
}

impl Sim<'_> {
    fn descriptor(&self, q: usize) -> ManifoldDescriptor {
        self.plan.steps[q].manifold.descriptor
    }

    fn side(&self, q: usize) -> DiscreteMode {
        DiscreteMode::for_foot(self.plan.steps[q].params.foot.y)
    }

    fn record(&self, hs: &HybridState, q: usize, field: &Field, events: Vec<TransitionEvent>) -> TraceRecord {
        TraceRecord {
            t: hs.t,
            zeta: hs.zeta,
            step: q,
            mode: hs.mode,
            sagittal: hs.sagittal,
            lateral: hs.lateral,
            z: field.params.surface.height(hs.sagittal.x),
            control: field.control,
            sigma: sigma_apex(&hs.sagittal, &self.descriptor(q)),
            events,
        }
    }

    fn nominal_guard(&self, q: usize, entry: &HybridState) -> Result<Guard, AutomatonError> {
        let tr = self.plan.transitions[q];
        Ok(match self.cfg.guard {
            GuardKind::Position => Guard::Position(tr.x_trans),
            GuardKind::Velocity => Guard::Velocity(tr.xdot_trans),
            GuardKind::Progression => {
                let arc = self.plan.steps[q]
                    .manifold
                    .arc_length(entry.sagittal.x, tr.x_trans)
                    .ok_or_else(|| {
                        AutomatonError::Config(format!(
                            "step {q}: entry x = {} m lies outside the nominal manifold",
                            entry.sagittal.x
                        ))
                    })?;
                Guard::Progression(entry.zeta + arc)
            }
            GuardKind::Manifold => Guard::Manifold {
                descriptor: self.descriptor(q + 1),
                level: -self.cfg.epsilon,
            },
        })
    }

    fn run(&mut self, trace: &mut HybridTrace, hooks: &mut dyn RecoveryHooks) -> Result<(), AutomatonError> {
        if self.plan.is_empty() {
            return Err(AutomatonError::Config("plan has no steps".into()));
        }
        let first = &self.plan.steps[0];
        let mut hs = HybridState {
            t: 0.0,
            zeta: 0.0,
            mode: self.side(0),
            sagittal: SagittalState::new(first.params.foot.x, first.keyframe.xdot_apex),
            lateral: self.cfg.initial_lateral,
        };
        let params = first.params;
        let mut field = Field {
            params,
            control: Control::new(params.omega, 0.0),
        };
        trace.records.push(self.record(&hs, 0, &field, Vec::new()));
        for q in 0..self.plan.len() {
            let (next_hs, next_field) = self.single_support(q, hs, field, trace, hooks)?;
            hs = next_hs;
            field = next_field;
        }
        Ok(())
    }

    fn triggered(d: &Disturbance, hs: &HybridState, zeta_entry: f64) -> bool {
        match d.trigger {
            Trigger::Position(x) => hs.sagittal.x >= x,
            Trigger::Progression(z) => hs.zeta - zeta_entry >= z,
        }
    }

    /// Runs step `q` from its entry state. Returns the state and field at
    /// the entry of step `q + 1`, or the final apex for the last step.
    fn single_support(
        &mut self,
        q: usize,
        entry: HybridState,
        field: Field,
        trace: &mut HybridTrace,
        hooks: &mut dyn RecoveryHooks,
    ) -> Result<(HybridState, Field), AutomatonError> {
        let last = q + 1 == self.plan.len();
        let mut st = StepRun {
            q,
            field,
            guard: if last { None } else { Some(self.nominal_guard(q, &entry)?) },
            armed: entry.sagittal.x >= field.params.foot.x,
            recovery: None,
            zeta_entry: entry.zeta,
            t_entry: entry.t,
            sigma_log: vec![(entry.zeta, sigma_apex(&entry.sagittal, &self.descriptor(q)))],
            pushes: Vec::new(),
        };
        let mut hs = entry;
        if last && hs.sagittal.x >= field.params.foot.x {
            return Ok((hs, field));
        }
        loop {
            for i in 0..self.schedule.len() {
                let d = self.schedule[i];
                if self.fired[i] || d.step != q || !Self::triggered(&d, &hs, st.zeta_entry) {
                    continue;
                }
                self.fired[i] = true;
                hs = self.push(&d, hs, &mut st, trace, hooks)?;
            }

            let u = match st.recovery.as_mut() {
                Some(layer) => layer.command(&hs.sagittal).0,
                None => Control::new(st.field.params.omega, 0.0),
            };
            st.field.control = u;
            if let Some(r) = trace.records.last_mut() {
                r.control = u;
            }

            let p = st.field.params.with_omega(u.omega);
            let sag = pendulum::step(&hs.sagittal, &p, u.tau_y, self.cfg.dt, self.cfg.scheme);
            let lat = pendulum::step(&hs.lateral, &p, 0.0, self.cfg.dt, self.cfg.scheme);
            let fell_sideways = (lat.y - p.foot.y).abs() > self.cfg.max_lateral_offset;
            if !(sag.is_finite() && lat.is_finite()) || !(sag.xd > 0.0) || fell_sideways {
                return Err(AutomatonError::Diverged { t: hs.t + self.cfg.dt, step: q });
            }
            let w = st.field.params.omega;
            let next = HybridState {
                t: hs.t + self.cfg.dt,
                zeta: hs.zeta + (sag.x - hs.sagittal.x).hypot((sag.xd - hs.sagittal.xd) / w),
                mode: hs.mode,
                sagittal: sag,
                lateral: lat,
            };
            if next.t - st.t_entry > self.cfg.max_step_time {
                return Err(AutomatonError::Timeout {
                    step: q,
                    time: self.cfg.max_step_time,
                });
            }
            let sigma = sigma_apex(&next.sagittal, &self.descriptor(q));
            st.sigma_log.push((next.zeta, sigma));
            let crossing = match (st.armed, st.guard) {
                (true, Some(g)) => guard_crossed(&g, &hs, &next).map(|f| (g, f)),
                _ => None,
            };
            st.armed |= next.sagittal.x >= st.field.params.foot.x;
            hs = next;

            if let Some((guard, fraction)) = crossing {
                self.close_pushes(&st, trace);
                return self.switch(&st, hs, guard, fraction, trace);
            }
            trace.records.push(self.record(&hs, q, &st.field, Vec::new()));
            if last && hs.sagittal.x >= st.field.params.foot.x {
                self.close_pushes(&st, trace);
                return Ok((hs, st.field));
            }
        }
    }

    /// Applies a scheduled impulse and decides the recovery.
    fn push(
        &mut self,
        d: &Disturbance,
        hs: HybridState,
        st: &mut StepRun,
        trace: &mut HybridTrace,
        hooks: &mut dyn RecoveryHooks,
    ) -> Result<HybridState, AutomatonError> {
        let q = st.q;
        let event = TransitionEvent::impulse(d.dxd, d.dyd);
        let (post, _) = apply_transition(&event, &hs, &st.field, self.cfg.contact)?;
        let last = q + 1 == self.plan.len();
        let asymptote = self.descriptor(if last { q } else { q + 1 });
        let pattern = classify_disturbance(&hs.sagittal, &post.sagittal, &asymptote);
        let sigma = sigma_apex(&post.sagittal, &self.descriptor(q));

        let mut outcome = RecoveryOutcome::Passive;
        let mut recoverable = None;
        let x_trans = (!last).then(|| self.plan.transitions[q].x_trans);
        if let Some(x_trans) = x_trans.filter(|&x| d.dxd != 0.0 && post.sagittal.x < x) {
            let nominal = self.plan.steps[q].params;
            let req = RecoveryRequest {
                step: q,
                state: post.sagittal,
                params: nominal,
                xdot_apex: self.plan.steps[q].keyframe.xdot_apex,
                x_trans,
                epsilon: self.cfg.epsilon,
                dt: self.cfg.dt,
            };
            st.recovery = None;
            if let Some(rec) = hooks.recover(&req)? {
                recoverable = Some(rec.recoverable);
                if rec.recoverable {
                    st.recovery = Some(rec.layer);
                    outcome = RecoveryOutcome::Continuous;
                } else {
                    let at = advance_to_position(post.sagittal, &nominal, 0.0, x_trans)?;
                    let next = &self.plan.steps[q + 1];
                    let x_foot = replan_foot(
                        x_trans,
                        at.state.xd,
                        next.keyframe.xdot_apex,
                        next.params.omega,
                    )?;
                    log::info!("step {q}: next foot re-planned to x = {x_foot:.4} m");
                    self.plan.replan_foot(q + 1, x_foot)?;
                    st.guard = Some(Guard::Position(x_trans));
                    outcome = RecoveryOutcome::Replanned { x_foot };
                }
            }
        }

        trace.records.push(self.record(&post, q, &st.field, vec![event]));
        st.sigma_log.push((post.zeta, sigma));
        st.pushes.push((trace.disturbances.len(), st.sigma_log.len() - 1));
        trace.disturbances.push(DisturbanceRecord {
            step: q,
            record: trace.records.len() - 1,
            t: post.t,
            zeta: post.zeta,
            dxd: d.dxd,
            dyd: d.dyd,
            pattern,
            sigma,
            recoverable,
            outcome,
            kappa: None,
        });
        Ok(post)
    }

    fn close_pushes(&self, st: &StepRun, trace: &mut HybridTrace) {
        let Some(&(zeta_end, _)) = st.sigma_log.last() else { return };
        for &(di, li) in &st.pushes {
            let zeta_d = st.sigma_log[li].0;
            trace.disturbances[di].kappa = sensitivity_norm(&st.sigma_log[li..], zeta_d, zeta_end).ok();
        }
    }

    /// Lateral foot of step `q` from the state at the contact switch.
    ///
    /// The search range follows the CoM: the planned foot is shifted by the
    /// CoM's distance from the planned midline between the two feet.
    fn lateral_foot(&self, q: usize, hs: &HybridState, params: &StepParameters) -> Result<f64, AutomatonError> {
        let feet = &self.plan.steps;
        let y_nom = feet[q].params.foot.y;
        let midline = 0.5 * (feet[q.saturating_sub(1)].params.foot.y + y_nom);
        let centre = y_nom + (hs.lateral.y - midline);
        let r = self.cfg.lateral_range;
        let req = LateralSearch {
            lateral: hs.lateral,
            sagittal: hs.sagittal,
            params: *params,
            initial_guess: centre,
            bounds: (centre - r, centre + r),
            n_max: self.cfg.lateral_iterations,
            ydot_tol: self.cfg.lateral_tolerance,
            dt: self.cfg.dt,
        };
        match lateral_foot_search(&req) {
            Ok(sol) => Ok(sol.y_foot),
            Err(PlannerError::NonConvergence {
                best_foot,
                best_velocity,
                ..
            }) => {
                log::warn!("step {q}: lateral search kept y = {best_foot:.4} m (apex ẏ = {best_velocity:.2e} m/s)");
                Ok(best_foot)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Contact switch from step `st.q` at the first sample past the guard.
    fn switch(
        &mut self,
        st: &StepRun,
        hs: HybridState,
        guard: Guard,
        fraction: f64,
        trace: &mut HybridTrace,
    ) -> Result<(HybridState, Field), AutomatonError> {
        let q1 = st.q + 1;
        let mut params = self.plan.steps[q1].params;
        params.foot.y = self.lateral_foot(q1, &hs, &params)?;
        let side = self.side(q1);
        let mut transition = StepTransition {
            from: st.q,
            to: q1,
            record: trace.records.len(),
            guard,
            fraction,
            state: hs.sagittal,
            foot: params.foot,
            dual_duration: None,
        };
        match self.cfg.contact {
            ContactModel::Instantaneous => {
                let e = TransitionEvent::contact(TransitionClass::Autonomous, side, params);
                let (hs, field) = apply_transition(&e, &hs, &st.field, self.cfg.contact)?;
                trace.records.push(self.record(&hs, q1, &field, vec![e]));
                trace.transitions.push(transition);
                Ok((hs, field))
            }
            ContactModel::MultiContact => {
                let e = TransitionEvent::contact(TransitionClass::Autonomous, DiscreteMode::DualSupport, params);
                let (dual, field) = apply_transition(&e, &hs, &st.field, self.cfg.contact)?;
                trace.records.push(self.record(&dual, q1, &field, vec![e]));
                let (end, duration) = self.dual_support(st, dual, &params, &field, trace)?;
                transition.dual_duration = Some(duration);
                trace.transitions.push(transition);
                let e = TransitionEvent::contact(TransitionClass::Timed, side, params);
                let (hs, field) = apply_transition(&e, &end, &field, self.cfg.contact)?;
                let r = trace.records.last_mut().expect("dual support recorded");
                r.mode = hs.mode;
                r.events.push(e);
                Ok((hs, field))
            }
        }
    }

    /// Time from the switch to the next transition (or twice the time to
    /// the apex for the last step) under the new contact.
    fn step_slot(&self, q1: usize, s: &SagittalState, params: &StepParameters) -> Result<f64, AutomatonError> {
        match self.plan.transitions.get(q1) {
            Some(tr) if tr.x_trans > s.x => Ok(advance_to_position(*s, params, 0.0, tr.x_trans)?.elapsed),
            _ => Ok(2.0 * time_to_apex(s, params.foot.x, params.omega).map_err(PlannerError::from)?),
        }
    }

    /// Follows the quintic joining the outgoing flow to the incoming one.
    /// Returns the state at its end and its duration.
    fn dual_support(
        &self,
        st: &StepRun,
        start: HybridState,
        params: &StepParameters,
        field: &Field,
        trace: &mut HybridTrace,
    ) -> Result<(HybridState, f64), AutomatonError> {
        let q1 = st.q + 1;
        let slot = self.step_slot(q1, &start.sagittal, params)?;
        let duration = self.cfg.dual_fraction * slot;
        let old = &st.field;
        let old_p = old.params.with_omega(old.control.omega);
        let acc = |p: &StepParameters, pos: f64, foot: f64, tau: f64| {
            p.omega * p.omega * (pos - foot) - p.torque_gain() * tau
        };
        let (s0, l0) = (start.sagittal, start.lateral);
        let ax0 = acc(&old_p, s0.x, old_p.foot.x, old.control.tau_y);
        let ay0 = acc(&old_p, l0.y, old_p.foot.y, 0.0);
        let slope0 = old.params.surface.slope;
        let s1 = closed_form_state(s0.x, s0.xd, params.foot.x, params.omega, duration);
        let l1 = closed_form_lateral(l0, params.foot.y, params.omega, duration);
        let ax1 = acc(params, s1.x, params.foot.x, 0.0);
        let ay1 = acc(params, l1.y, params.foot.y, 0.0);
        let slope1 = params.surface.slope;
        let entry = [
            Boundary::new(s0.x, s0.xd, ax0),
            Boundary::new(l0.y, l0.yd, ay0),
            Boundary::new(old.params.surface.height(s0.x), slope0 * s0.xd, slope0 * ax0),
        ];
        let exit = [
            Boundary::new(s1.x, s1.xd, ax1),
            Boundary::new(l1.y, l1.yd, ay1),
            Boundary::new(params.surface.height(s1.x), slope1 * s1.xd, slope1 * ax1),
        ];
        let seg = fit_multicontact(&entry, &exit, self.cfg.dual_fraction, slot)?;
        let mut hs = start;
        let mut k = 1usize;
        loop {
            let tau = (k as f64 * self.cfg.dt).min(seg.duration);
            let b = seg.eval(tau);
            let done = tau >= seg.duration;
            let (sag, lat, z) = if done {
                (s1, l1, exit[2].pos)
            } else {
                (
                    SagittalState::new(b[0].pos, b[0].vel),
                    LateralState::new(b[1].pos, b[1].vel),
                    b[2].pos,
                )
            };
            if !(sag.xd > 0.0) {
                return Err(AutomatonError::Diverged { t: start.t + tau, step: q1 });
            }
            let next = HybridState {
                t: start.t + tau,
                zeta: hs.zeta + (sag.x - hs.sagittal.x).hypot((sag.xd - hs.sagittal.xd) / params.omega),
                mode: hs.mode,
                sagittal: sag,
                lateral: lat,
            };
            let mut r = self.record(&next, q1, field, Vec::new());
            r.z = z;
            trace.records.push(r);
            hs = next;
            if done {
                return Ok((hs, seg.duration));
            }
            k += 1;
        }
    }
}
