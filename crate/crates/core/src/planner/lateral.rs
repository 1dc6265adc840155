use super::PlannerError;
use crate::pendulum::{self, time_to_apex, LateralState, SagittalState, Scheme, StepParameters};

/// Inputs of the lateral foot placement search for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralSearch {
    /// Lateral CoM state at the start of the step.
    pub lateral: LateralState,
    /// Sagittal CoM state at the start of the step; fixes the apex instant.
    pub sagittal: SagittalState,
    /// Contact parameters; `foot.y` is ignored.
    pub params: StepParameters,
    pub initial_guess: f64,
    /// Admissible foot range `(min, max)`.
    pub bounds: (f64, f64),
    pub n_max: usize,
    pub ydot_tol: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralSolution {
    pub y_foot: f64,
    /// Lateral velocity at the sagittal apex with this foot.
    pub ydot_apex: f64,
    /// Lateral position at the sagittal apex with this foot.
    pub y_apex: f64,
    pub iterations: usize,
    /// Whether any iterate had to be clamped into the bounds.
    pub clamped: bool,
}

/// Lateral state at the instant the CoM passes over the sagittal foot,
/// integrated with zero lateral torque and lateral foot `y_foot`.
pub fn lateral_apex_velocity(
    lateral: LateralState,
    sagittal: SagittalState,
    params: &StepParameters,
    y_foot: f64,
    dt: f64,
) -> Result<LateralState, PlannerError> {
    let horizon = time_to_apex(&sagittal, params.foot.x, params.omega)?;
    let mut p = *params;
    p.foot.y = y_foot;
    let n = (horizon / dt).ceil().max(1.0) as usize;
    let h = horizon / n as f64;
    let mut s = lateral;
    for _ in 0..n {
        s = pendulum::step(&s, &p, 0.0, h, Scheme::Rk4);
    }
    Ok(s)
}

/// Secant search for the lateral foot that zeroes the lateral velocity at
/// the sagittal apex.
///
/// The first slope estimate comes from a probe 1 mm from the initial guess.
/// Iterates leaving `bounds` are clamped and flagged.
pub fn lateral_foot_search(req: &LateralSearch) -> Result<LateralSolution, PlannerError> {
    let (lo, hi) = req.bounds;
    if !(lo <= hi) {
        return Err(PlannerError::InvalidInput(format!(
            "empty lateral foot range [{lo}, {hi}]"
        )));
    }
    if req.n_max < 1 {
        return Err(PlannerError::InvalidInput("n_max must be at least 1".into()));
    }
    let mut clamped = false;
    let mut clamp = |y: f64| {
        let c = y.clamp(lo, hi);
        if c != y {
            clamped = true;
            log::warn!("lateral foot {y:.4} m clamped to {c:.4} m");
        }
        c
    };
    let eval = |y: f64| {
        lateral_apex_velocity(req.lateral, req.sagittal, &req.params, y, req.dt)
    };

    let mut foot = clamp(req.initial_guess);
    let mut apex = eval(foot)?;
    let mut best = (foot, apex);
    let mut n = 1;
    let mut slope = None;

    while n < req.n_max && apex.yd.abs() > req.ydot_tol {
        let d = match slope {
            Some(d) => d,
            None => {
                let delta = if foot + 1e-3 <= hi { 1e-3 } else { -1e-3 };
                let probe = eval(foot + delta)?;
                (probe.yd - apex.yd) / delta
            }
        };
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next_foot = clamp(foot - apex.yd / d);
        let next_apex = eval(next_foot)?;
        n += 1;
        if next_foot == foot {
            apex = next_apex;
            break;
        }
        slope = Some((next_apex.yd - apex.yd) / (next_foot - foot));
        foot = next_foot;
        apex = next_apex;
        if apex.yd.abs() < best.1.yd.abs() {
            best = (foot, apex);
        }
    }

    if apex.yd.abs() <= req.ydot_tol {
        Ok(LateralSolution {
            y_foot: foot,
            ydot_apex: apex.yd,
            y_apex: apex.y,
            iterations: n,
            clamped,
        })
    } else {
        Err(PlannerError::NonConvergence {
            iterations: n,
            best_foot: best.0,
            best_velocity: best.1.yd,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{FootPosition, PathSurface};

    fn request(y0: f64, yd0: f64, guess: f64) -> LateralSearch {
        LateralSearch {
            lateral: LateralState::new(y0, yd0),
            sagittal: SagittalState::new(-0.2, 0.9),
            params: StepParameters::new(3.13, FootPosition::new(0.0, 0.0, 0.0), PathSurface::flat(1.0)),
            initial_guess: guess,
            bounds: (-0.5, 0.5),
            n_max: 20,
            ydot_tol: 1e-4,
            dt: 1e-3,
        }
    }

    #[test]
    fn equilibrium_converges_immediately() {
        let sol = lateral_foot_search(&request(0.12, 0.0, 0.12)).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.ydot_apex, 0.0);
        assert_eq!(sol.y_foot, 0.12);
    }

    #[test]
    fn converged_foot_zeroes_the_apex_velocity() {
        for (y0, yd0) in [(0.05, 0.2), (-0.1, 0.3), (0.0, -0.25), (0.1, 0.0)] {
            let sol = lateral_foot_search(&request(y0, yd0, 0.0)).unwrap();
            assert!(sol.iterations <= 20);
            let check = lateral_apex_velocity(
                LateralState::new(y0, yd0),
                SagittalState::new(-0.2, 0.9),
                &request(y0, yd0, 0.0).params,
                sol.y_foot,
                1e-4,
            )
            .unwrap();
            assert!(check.yd.abs() <= 1e-4, "{check:?}");
        }
    }

    #[test]
    fn wider_foot_means_larger_apex_acceleration() {
        // Two consecutive steps; the further apart the feet, the harder the
        // CoM is pushed back at the apex.
        let sag = SagittalState::new(-0.2, 0.9);
        let p = request(0.0, 0.0, 0.0).params;
        let mut last = 0.0;
        for foot in [0.05, 0.1, 0.15, 0.2] {
            let apex = lateral_apex_velocity(LateralState::new(0.0, 0.2), sag, &p, foot, 1e-3).unwrap();
            let acc = (p.omega * p.omega * (apex.y - foot)).abs();
            assert!(acc > last);
            last = acc;
        }
    }

    #[test]
    fn clamped_search_reports_non_convergence() {
        let mut req = request(0.0, 0.6, 0.0);
        req.bounds = (-0.02, 0.02);
        match lateral_foot_search(&req) {
            Err(PlannerError::NonConvergence { best_foot, .. }) => assert_eq!(best_foot, 0.02),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut req = request(0.0, 0.1, 0.0);
        req.n_max = 0;
        assert!(lateral_foot_search(&req).is_err());
        req.n_max = 5;
        req.bounds = (0.3, 0.1);
        assert!(lateral_foot_search(&req).is_err());
    }
}
