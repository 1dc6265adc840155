use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::closed_loop::rollout;
use super::dp::{solve_dp, DpConfig, GridAxis, PolicyTable};
use super::ControllerError;
use crate::manifold::sigma_apex;
use crate::pendulum::SagittalState;

/// Grid of initial states from which the saturated policy reaches the
/// boundary layer by the transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverabilityMask {
    pub stage: GridAxis,
    pub state: GridAxis,
    /// Row-major `[stage][state]`.
    pub cells: Vec<bool>,
}

impl RecoverabilityMask {
    pub fn get(&self, n: usize, j: usize) -> bool {
        self.cells[n * self.state.count() + j]
    }

    pub fn recoverable_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Lookup at the stage cell containing `x` and the nearest velocity node.
    /// States outside the grid are reported unrecoverable.
    pub fn contains(&self, s: &SagittalState) -> bool {
        let last = self.stage.value(self.stage.count() - 1);
        let top = self.state.value(self.state.count() - 1);
        if s.x < self.stage.min - 1e-9 || s.x > last + 1e-9 {
            return false;
        }
        if s.xd < self.state.min - 0.5 * self.state.res || s.xd > top + 0.5 * self.state.res {
            return false;
        }
        let n = self.stage.nearest(s.x);
        self.get(n, self.state.nearest(s.xd))
    }
}

/// Samples every `(stage, velocity)` node as an initial state, runs the
/// saturated policy to the transition and marks the node when the trajectory
/// reaches the boundary layer at or before the transition. Stalls and
/// timeouts are unmarked.
pub fn estimate_recoverability(
    cfg: &DpConfig,
    epsilon: f64,
    dt: f64,
) -> Result<(PolicyTable, RecoverabilityMask), ControllerError> {
    if !(epsilon > 0.0) || !(dt > 0.0) {
        return Err(ControllerError::Config("epsilon and dt must be positive".into()));
    }
    let table = Arc::new(solve_dp(cfg)?);
    let mask = mask_for(cfg, table.clone(), epsilon, dt);
    let table = Arc::try_unwrap(table).unwrap_or_else(|t| (*t).clone());
    Ok((table, mask))
}

pub(crate) fn mask_for(
    cfg: &DpConfig,
    table: Arc<PolicyTable>,
    epsilon: f64,
    dt: f64,
) -> RecoverabilityMask {
    let (ns, nx) = (cfg.stage.count(), cfg.state.count());
    let mut cells = Vec::with_capacity(ns * nx);
    for n in 0..ns {
        for j in 0..nx {
            cells.push(cell_recoverable(cfg, table.clone(), n, j, epsilon, dt));
        }
    }
    RecoverabilityMask {
        stage: cfg.stage,
        state: cfg.state,
        cells,
    }
}

/// Value of one mask cell, computed on its own. Identical to the
/// corresponding entry of the full mask.
pub fn cell_recoverable(
    cfg: &DpConfig,
    table: Arc<PolicyTable>,
    n: usize,
    j: usize,
    epsilon: f64,
    dt: f64,
) -> bool {
    let start = SagittalState::new(cfg.stage.value(n), cfg.state.value(j));
    if n + 1 >= cfg.stage.count() {
        return sigma_apex(&start, &cfg.manifold()).abs() <= epsilon;
    }
    rollout(cfg, table, start, epsilon, dt)
        .map(|r| r.entered.is_some())
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::dp::ControlAxis;

    #[test]
    fn bundle_cells_are_marked_and_early_stages_are_wider() {
        let cfg = DpConfig {
            stage: GridAxis::new(1.0, 1.4, 0.02),
            state: GridAxis::new(0.3, 1.3, 0.01),
            omega: ControlAxis::new(2.83, 3.43, 7),
            tau: ControlAxis::new(-3.0, 3.0, 7),
            ..Default::default()
        };
        let eps = 5e-4;
        let (_, mask) = estimate_recoverability(&cfg, eps, 1e-3).unwrap();
        let m = cfg.manifold();
        let last = cfg.stage.count() - 1;
        let row = |n: usize| (0..cfg.state.count()).filter(|&j| mask.get(n, j)).count();
        for j in 0..cfg.state.count() {
            let s = SagittalState::new(cfg.stage.value(last), cfg.state.value(j));
            assert_eq!(mask.get(last, j), sigma_apex(&s, &m).abs() <= eps);
        }
        for n in 0..last {
            for j in 0..cfg.state.count() {
                let s = SagittalState::new(cfg.stage.value(n), cfg.state.value(j));
                if sigma_apex(&s, &m).abs() <= eps {
                    assert!(mask.get(n, j));
                }
            }
        }
        assert!(row(0) > row(last));
        assert_eq!(mask.cells.len(), cfg.stage.count() * cfg.state.count());
    }
}
