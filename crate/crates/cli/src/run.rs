use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use psl_core::automaton::{
    run_plan, DisturbancePattern, DpRecovery, Guard, HybridTrace, PassiveRecovery,
    RecoveryHooks, RecoveryOutcome,
};
use psl_core::planner::{generate_nominal, NominalPlan, PlannerError};

use crate::scenario::{RecoveryMode, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("planning failed: {0}")]
    Planner(#[from] PlannerError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow {
    pub from: usize,
    pub to: usize,
    pub t: f64,
    pub x: f64,
    pub xd: f64,
    pub guard: &'static str,
    pub foot_x: f64,
    pub foot_y: f64,
    pub foot_z: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisturbanceRow {
    pub step: usize,
    pub t: f64,
    pub dxd: f64,
    pub dyd: f64,
    pub pattern: DisturbancePattern,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recoverable: Option<bool>,
    pub outcome: RecoveryOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub plan: Duration,
    pub run: Duration,
}

/// Outcome of one scenario. Everything but the timings is a deterministic
/// function of the scenario.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub plan: NominalPlan,
    pub trace: HybridTrace,
    pub transitions: Vec<TransitionRow>,
    pub disturbances: Vec<DisturbanceRow>,
    pub timings: Timings,
}

impl RunReport {
    pub fn completed(&self) -> bool {
        self.trace.completed()
    }

    pub fn replan_count(&self) -> usize {
        self.trace.replan_count()
    }

    /// Deterministic summary as a TOML document.
    pub fn summary(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            steps: usize,
            completed: bool,
            #[serde(skip_serializing_if = "Option::is_none")]
            failure: Option<String>,
            samples: usize,
            max_abs_sigma: f64,
            replans: usize,
            transition: &'a [TransitionRow],
            disturbance: &'a [DisturbanceRow],
        }
        let s = Summary {
            steps: self.plan.len(),
            completed: self.completed(),
            failure: self.trace.failure.as_ref().map(|f| {
                format!("t = {} s, step {}: {}", f.t, f.step, f.error)
            }),
            samples: self.trace.records.len(),
            max_abs_sigma: self.trace.max_abs_sigma(),
            replans: self.replan_count(),
            transition: &self.transitions,
            disturbance: &self.disturbances,
        };
        toml::to_string(&s).expect("summary serializes")
    }
}

pub fn guard_name(g: &Guard) -> &'static str {
    match g {
        Guard::Position(_) => "position",
        Guard::Velocity(_) => "velocity",
        Guard::Progression(_) => "progression",
        Guard::Manifold { .. } => "manifold",
    }
}

pub fn plan_scenario(s: &Scenario) -> Result<NominalPlan, RunError> {
    let terrain = s.terrain_spec()?;
    let keyframes = s.keyframes_for(&terrain);
    Ok(generate_nominal(&terrain, &keyframes, &s.planner)?)
}

/// Plans the scenario and walks it through the automaton with its
/// disturbance schedule. A run that stops early is still reported; its
/// failure is in the trace.
pub fn run_scenario(s: &Scenario) -> Result<RunReport, RunError> {
    s.validate()?;
    let start = Instant::now();
    let plan = plan_scenario(s)?;
    let plan_time = start.elapsed();
    let mut dp = DpRecovery::new(s.dp.clone());
    let hooks: &mut dyn RecoveryHooks = match s.recovery {
        RecoveryMode::Dp => &mut dp,
        RecoveryMode::Passive => &mut PassiveRecovery,
    };
    let start = Instant::now();
    let trace = run_plan(&plan, &s.automaton, &s.disturbances, hooks);
    let run_time = start.elapsed();
    log::info!(
        "{} steps planned in {:.3} s, walked in {:.3} s",
        plan.len(),
        plan_time.as_secs_f64(),
        run_time.as_secs_f64()
    );

    let transitions = trace
        .transitions
        .iter()
        .map(|tr| TransitionRow {
            from: tr.from,
            to: tr.to,
            t: trace.records[tr.record].t,
            x: tr.state.x,
            xd: tr.state.xd,
            guard: guard_name(&tr.guard),
            foot_x: tr.foot.x,
            foot_y: tr.foot.y,
            foot_z: tr.foot.z,
            dual_duration: tr.dual_duration,
        })
        .collect();
    let disturbances = trace
        .disturbances
        .iter()
        .map(|d| DisturbanceRow {
            step: d.step,
            t: d.t,
            dxd: d.dxd,
            dyd: d.dyd,
            pattern: d.pattern,
            sigma: d.sigma,
            recoverable: d.recoverable,
            outcome: d.outcome,
            kappa: d.kappa,
        })
        .collect();
    Ok(RunReport {
        plan,
        trace,
        transitions,
        disturbances,
        timings: Timings {
            plan: plan_time,
            run: run_time,
        },
    })
}
