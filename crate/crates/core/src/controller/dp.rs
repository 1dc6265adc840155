use serde::{Deserialize, Serialize};

use super::{stage_cost, Control, ControllerError};
use crate::manifold::{sigma_apex, ManifoldDescriptor};
use crate::pendulum::{FootPosition, PathSurface, SagittalState, StepParameters, TorqueLimits, GRAVITY};

/// Uniform grid `min, min + res, …, max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub res: f64,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, res: f64) -> Self {
        Self { min, max, res }
    }

    pub fn validate(&self, name: &str) -> Result<(), ControllerError> {
        if !(self.res > 0.0 && self.max > self.min && self.min.is_finite() && self.max.is_finite()) {
            return Err(ControllerError::Config(format!(
                "{name}: need min < max and res > 0, got [{}, {}] / {}",
                self.min, self.max, self.res
            )));
        }
        let steps = (self.max - self.min) / self.res;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(ControllerError::Config(format!(
                "{name}: range is not a whole number of resolutions"
            )));
        }
        Ok(())
    }

    /// Number of nodes, both ends included.
    pub fn count(&self) -> usize {
        ((self.max - self.min) / self.res).round() as usize + 1
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + i as f64 * self.res
    }

    /// Index of the nearest node, clamped to the grid.
    pub fn nearest(&self, v: f64) -> usize {
        let i = ((v - self.min) / self.res).round();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.count() - 1)
        }
    }

    /// Index of the cell `[value(i), value(i+1))` containing `v`, clamped to
    /// `0..count-1`.
    pub fn cell(&self, v: f64) -> usize {
        let i = ((v - self.min) / self.res + 1e-9).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.count() - 2)
        }
    }
}

/// `levels` evenly spaced values across `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAxis {
    pub min: f64,
    pub max: f64,
    pub levels: usize,
}

impl ControlAxis {
    pub fn new(min: f64, max: f64, levels: usize) -> Self {
        Self { min, max, levels }
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.levels == 1 {
            return 0.5 * (self.min + self.max);
        }
        self.min + (self.max - self.min) * k as f64 / (self.levels - 1) as f64
    }

    fn validate(&self, name: &str) -> Result<(), ControllerError> {
        if self.levels == 0 || !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(ControllerError::Config(format!(
                "{name}: need min ≤ max and at least one level"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpWeights {
    /// Terminal velocity error weight.
    pub alpha: f64,
    /// Manifold deviation weight.
    pub beta: f64,
    /// Torque weight.
    pub gamma1: f64,
    /// Slope deviation weight.
    pub gamma2: f64,
}

/// How the cost-to-go is read at successor velocities between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Nearest,
}

/// Dynamic-programming problem: stages in `x`, state `ẋ`, controls `(ω, τ_y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpConfig {
    /// Stage positions [m]; the last node is the transition.
    pub stage: GridAxis,
    /// Sagittal velocity grid [m/s].
    pub state: GridAxis,
    pub omega: ControlAxis,
    pub tau: ControlAxis,
    pub weights: DpWeights,
    pub discount: f64,
    pub omega_ref: f64,
    pub tau_ref: f64,
    pub x_foot: f64,
    pub xdot_apex: f64,
    pub mass: f64,
    pub gravity: f64,
    pub interpolation: Interpolation,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            stage: GridAxis::new(0.9, 1.5, 0.01),
            state: GridAxis::new(0.03, 1.5, 0.01),
            omega: ControlAxis::new(2.83, 3.43, 13),
            tau: ControlAxis::new(-3.0, 3.0, 13),
            weights: DpWeights {
                alpha: 100.0,
                beta: 4e4,
                gamma1: 5.0,
                gamma2: 5.0,
            },
            discount: 1.0,
            omega_ref: 3.13,
            tau_ref: 0.0,
            x_foot: 1.2,
            xdot_apex: 0.6,
            mass: 1.0,
            gravity: GRAVITY,
            interpolation: Interpolation::Linear,
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        self.stage.validate("stage")?;
        self.state.validate("state")?;
        if !(self.state.min > 0.0) {
            return Err(ControllerError::Config(
                "state grid must hold forward velocities only".into(),
            ));
        }
        self.omega.validate("omega")?;
        self.tau.validate("tau")?;
        if !(self.omega.min > 0.0) {
            return Err(ControllerError::Config("omega levels must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(ControllerError::Config(format!(
                "discount {} outside [0, 1]",
                self.discount
            )));
        }
        let w = &self.weights;
        if [w.alpha, w.beta, w.gamma1, w.gamma2].iter().any(|v| !(*v >= 0.0)) {
            return Err(ControllerError::Config("weights must be non-negative".into()));
        }
        if !(self.mass > 0.0 && self.gravity > 0.0 && self.omega_ref > 0.0) {
            return Err(ControllerError::Config(
                "mass, gravity and omega_ref must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn reference(&self) -> Control {
        Control::new(self.omega_ref, self.tau_ref)
    }

    /// Nominal manifold the controller tracks.
    pub fn manifold(&self) -> ManifoldDescriptor {
        ManifoldDescriptor::new(self.xdot_apex, self.x_foot, self.omega_ref)
    }

    /// Contact parameters for simulating under a commanded slope.
    pub fn step_parameters(&self, omega: f64) -> StepParameters {
        let z = self.gravity / (self.omega_ref * self.omega_ref);
        let mut p = StepParameters::new(omega, FootPosition::new(self.x_foot, 0.0, 0.0), PathSurface::flat(z));
        p.mass = self.mass;
        p.gravity = self.gravity;
        p.tau_y_limits = TorqueLimits {
            min: self.tau.min.min(self.tau_ref),
            max: self.tau.max.max(self.tau_ref),
        };
        p
    }

    /// Same problem with torque levels on `[−bound, bound]` at the current
    /// torque spacing, so that smaller bounds give subsets of the levels.
    pub fn with_tau_bound(&self, bound: f64) -> Self {
        let step = if self.tau.levels > 1 {
            (self.tau.max - self.tau.min) / (self.tau.levels - 1) as f64
        } else {
            bound.max(f64::MIN_POSITIVE)
        };
        let half = (bound / step).round() as usize;
        Self {
            tau: ControlAxis::new(-(half as f64) * step, half as f64 * step, 2 * half + 1),
            ..self.clone()
        }
    }

    /// Velocity of the nominal manifold at the terminal stage.
    pub fn terminal_nominal_velocity(&self) -> f64 {
        self.manifold().xdot_at(self.stage.value(self.stage.count() - 1))
    }
}

/// Result of applying one control over one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Stage cost, including any escape penalty.
    pub cost: f64,
    /// Velocity at the next stage, clamped to the state grid.
    pub next_xd: f64,
    /// Whether the successor left the grid or the CoM stalled.
    pub penalized: bool,
}

/// Stage transition and cost model shared by the solver and its oracles.
#[derive(Debug, Clone)]
pub struct DpModel {
    cfg: DpConfig,
    manifold: ManifoldDescriptor,
    penalty: f64,
}

/// Velocity after moving from `x0` to `x1` under constant `(ω, τ)`, or `None`
/// if the CoM stops on the way.
pub(crate) fn exact_velocity(x0: f64, xd0: f64, x1: f64, omega: f64, x_eq: f64) -> Option<f64> {
    let w2 = omega * omega;
    let energy = xd0 * xd0 - w2 * (x0 - x_eq) * (x0 - x_eq);
    let at = |x: f64| energy + w2 * (x - x_eq) * (x - x_eq);
    let slowest = x_eq.clamp(x0.min(x1), x0.max(x1));
    (at(slowest) > 0.0).then(|| at(x1).sqrt())
}

impl DpModel {
    pub fn new(cfg: &DpConfig) -> Result<Self, ControllerError> {
        cfg.validate()?;
        let mut model = Self {
            cfg: cfg.clone(),
            manifold: cfg.manifold(),
            penalty: 0.0,
        };
        let mut worst: f64 = 0.0;
        for n in 0..model.stage_count() {
            for j in 0..cfg.state.count() {
                for c in 0..model.control_count() {
                    if let Some((cost, _)) = model.raw_step(n, cfg.state.value(j), c) {
                        worst = worst.max(cost);
                    }
                }
            }
        }
        model.penalty = 10.0 * worst;
        Ok(model)
    }

    pub fn config(&self) -> &DpConfig {
        &self.cfg
    }

    /// Number of decision stages (one less than the stage nodes).
    pub fn stage_count(&self) -> usize {
        self.cfg.stage.count() - 1
    }

    pub fn state_count(&self) -> usize {
        self.cfg.state.count()
    }

    pub fn control_count(&self) -> usize {
        self.cfg.omega.levels * self.cfg.tau.levels
    }

    /// Control of flat index `c = i_ω · n_τ + i_τ`.
    pub fn control(&self, c: usize) -> Control {
        let nt = self.cfg.tau.levels;
        Control::new(self.cfg.omega.value(c / nt), self.cfg.tau.value(c % nt))
    }

    /// Additive cost charged when a successor leaves the grid.
    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    fn raw_step(&self, n: usize, xd: f64, c: usize) -> Option<(f64, f64)> {
        let u = self.control(c);
        let x0 = self.cfg.stage.value(n);
        let x1 = self.cfg.stage.value(n + 1);
        let x_eq = self.cfg.x_foot + u.tau_y / (self.cfg.mass * self.cfg.gravity);
        let xm = 0.5 * (x0 + x1);
        let xd_mid = exact_velocity(x0, xd, xm, u.omega, x_eq)?;
        let xd1 = exact_velocity(x0, xd, x1, u.omega, x_eq)?;
        let sigma = sigma_apex(&SagittalState::new(xm, xd_mid), &self.manifold);
        Some((stage_cost(sigma, u.tau_y, u.omega, &self.cfg, x1 - x0), xd1))
    }

    /// Applies control `c` from velocity `xd` at stage `n`.
    ///
    /// A stall replaces the stage cost by the penalty; a stalled or escaping
    /// successor is clamped to the grid and charged the penalty.
    pub fn step(&self, n: usize, xd: f64, c: usize) -> StepOutcome {
        let grid = &self.cfg.state;
        match self.raw_step(n, xd, c) {
            Some((cost, xd1)) => {
                let clamped = xd1.clamp(grid.min, grid.value(grid.count() - 1));
                let escaped = xd1 < grid.min || xd1 > grid.max;
                StepOutcome {
                    cost: if escaped { cost + self.penalty } else { cost },
                    next_xd: clamped,
                    penalized: escaped,
                }
            }
            None => StepOutcome {
                cost: 2.0 * self.penalty,
                next_xd: grid.min,
                penalized: true,
            },
        }
    }

    pub fn terminal_cost(&self, xd: f64) -> f64 {
        let e = xd - self.cfg.terminal_nominal_velocity();
        self.cfg.weights.alpha * e * e
    }

    /// Cost-to-go of the next stage read at `xd`.
    pub fn value_at(&self, values: &[f64], xd: f64) -> f64 {
        let grid = &self.cfg.state;
        match self.cfg.interpolation {
            Interpolation::Nearest => values[grid.nearest(xd)],
            Interpolation::Linear => {
                let i = grid.cell(xd);
                let t = ((xd - grid.value(i)) / grid.res).clamp(0.0, 1.0);
                values[i] + t * (values[i + 1] - values[i])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub omega: f64,
    pub tau_y: f64,
    /// Optimal cost-to-go [dimensionless].
    pub cost: f64,
}

/// Optimal controls and cost-to-go on every `(stage node, state node)`.
/// The terminal row holds the reference controls and the terminal cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub stage: GridAxis,
    pub state: GridAxis,
    /// Row-major `[stage][state]`.
    pub entries: Vec<PolicyEntry>,
}

impl PolicyTable {
    pub fn stage_count(&self) -> usize {
        self.stage.count()
    }

    pub fn state_count(&self) -> usize {
        self.state.count()
    }

    pub fn get(&self, n: usize, j: usize) -> &PolicyEntry {
        &self.entries[n * self.state_count() + j]
    }

    /// Policy held over the stage containing `x`, at the nearest velocity node.
    pub fn lookup(&self, state: &SagittalState) -> Control {
        let e = self.get(self.stage.cell(state.x), self.state.nearest(state.xd));
        Control::new(e.omega, e.tau_y)
    }
}

/// Backward induction over all stages with exhaustive search of the control
/// grid. Ties go to the lowest flat control index.
pub fn solve_dp(cfg: &DpConfig) -> Result<PolicyTable, ControllerError> {
    let model = DpModel::new(cfg)?;
    Ok(solve_with(&model))
}

pub(crate) fn solve_with(model: &DpModel) -> PolicyTable {
    let cfg = model.config();
    let ns = model.state_count();
    let n_stages = model.stage_count();
    let r = cfg.reference();
    let mut values: Vec<f64> = (0..ns).map(|j| model.terminal_cost(cfg.state.value(j))).collect();
    let mut rows = vec![Vec::new(); n_stages + 1];
    rows[n_stages] = values
        .iter()
        .map(|&v| PolicyEntry {
            omega: r.omega,
            tau_y: r.tau_y,
            cost: v,
        })
        .collect();
    for n in (0..n_stages).rev() {
        let mut row = Vec::with_capacity(ns);
        for j in 0..ns {
            let xd = cfg.state.value(j);
            let mut best = (f64::INFINITY, 0);
            for c in 0..model.control_count() {
                let out = model.step(n, xd, c);
                let total = out.cost + cfg.discount * model.value_at(&values, out.next_xd);
                if total < best.0 {
                    best = (total, c);
                }
            }
            let u = model.control(best.1);
            row.push(PolicyEntry {
                omega: u.omega,
                tau_y: u.tau_y,
                cost: best.0,
            });
        }
        values = row.iter().map(|e| e.cost).collect();
        rows[n] = row;
    }
    PolicyTable {
        stage: cfg.stage,
        state: cfg.state,
        entries: rows.into_iter().flatten().collect(),
    }
}
