use serde::{Deserialize, Serialize};

use super::dynamics::{acceleration, PendulumPlane};
use super::{PendulumError, StepParameters};

/// Default integration step [s].
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical fourth-order Runge–Kutta.
    #[default]
    Rk4,
    /// Constant-acceleration stepping: first order, kept for comparisons.
    ConstantAcceleration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub dt: f64,
    pub scheme: Scheme,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            scheme: Scheme::Rk4,
        }
    }
}

/// Torque applied over each integration interval; piecewise constant.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSchedule {
    Constant(f64),
    /// One value per interval; the last value is held if the schedule is short.
    PerSample(Vec<f64>),
}

impl ControlSchedule {
    pub fn torque(&self, k: usize) -> f64 {
        match self {
            Self::Constant(t) => *t,
            Self::PerSample(v) => v.get(k).or(v.last()).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample<S> {
    pub t: f64,
    pub state: S,
    /// Torque held over the interval starting at this sample.
    pub control: f64,
    /// CoM height from the path surface.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub dt: f64,
    pub samples: Vec<TrajectorySample<S>>,
}

impl<S: PendulumPlane> Trajectory<S> {
    pub fn first(&self) -> &TrajectorySample<S> {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample<S> {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Advances one plane of the pendulum by `h` (negative `h` integrates backward).
pub fn step<S: PendulumPlane>(s: &S, p: &StepParameters, torque: f64, h: f64, scheme: Scheme) -> S {
    let (q, v) = (s.position(), s.velocity());
    let acc = |q: f64| acceleration(&S::from_pair(q, 0.0), p, torque);
    match scheme {
        Scheme::Rk4 => {
            let (k1q, k1v) = (v, acc(q));
            let (k2q, k2v) = (v + 0.5 * h * k1v, acc(q + 0.5 * h * k1q));
            let (k3q, k3v) = (v + 0.5 * h * k2v, acc(q + 0.5 * h * k2q));
            let (k4q, k4v) = (v + h * k3v, acc(q + h * k3q));
            S::from_pair(
                q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
                v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
            )
        }
        Scheme::ConstantAcceleration => {
            let a = acc(q);
            S::from_pair(q + v * h + 0.5 * a * h * h, v + a * h)
        }
    }
}

/// Integrates `n_steps` intervals of length `opts.dt` from `s0`.
pub fn integrate_trajectory<S: PendulumPlane>(
    s0: S,
    p: &StepParameters,
    schedule: &ControlSchedule,
    opts: IntegratorOptions,
    n_steps: usize,
) -> Result<Trajectory<S>, PendulumError> {
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(PendulumError::InvalidParameter(format!(
            "dt must be positive, got {}",
            opts.dt
        )));
    }
    p.validate()?;
    let limits = S::limits(p);
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut s = s0;
    for k in 0..=n_steps {
        let control = if k < n_steps { schedule.torque(k) } else { schedule.torque(k.saturating_sub(1)) };
        limits.check(control)?;
        samples.push(TrajectorySample {
            t: k as f64 * opts.dt,
            state: s,
            control,
            z: s.height(p),
        });
        if k == n_steps {
            break;
        }
        s = step(&s, p, control, opts.dt, opts.scheme);
        if !(s.position().is_finite() && s.velocity().is_finite()) {
            return Err(PendulumError::Divergence { step: k + 1 });
        }
    }
    Ok(Trajectory {
        dt: opts.dt,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{
        closed_form_state, orbital_energy, FootPosition, LateralState, PathSurface, SagittalState,
    };

    fn params() -> StepParameters {
        StepParameters::new(3.13, FootPosition::new(1.2, -0.1, 0.0), PathSurface::new(0.1, 1.0))
    }

    #[test]
    fn zero_steps_returns_initial_sample() {
        let s0 = SagittalState::new(1.0, 0.6);
        let tr = integrate_trajectory(s0, &params(), &ControlSchedule::Constant(0.0), Default::default(), 0)
            .unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.first().state, s0);
        assert_eq!(tr.first().t, 0.0);
        assert!((tr.first().z - 1.1).abs() < 1e-15);
    }

    #[test]
    fn samples_are_uniformly_spaced() {
        let tr = integrate_trajectory(
            LateralState::new(-0.05, 0.1),
            &params(),
            &ControlSchedule::Constant(0.0),
            Default::default(),
            250,
        )
        .unwrap();
        assert_eq!(tr.len(), 251);
        for (k, w) in tr.samples.windows(2).enumerate() {
            assert!(w[1].t > w[0].t);
            assert!((w[1].t - w[0].t - 1e-3).abs() < 1e-15, "step {k}");
        }
    }

    #[test]
    fn torque_free_energy_is_conserved() {
        let p = params();
        let s0 = SagittalState::new(0.95, 0.9);
        let tr = integrate_trajectory(s0, &p, &ControlSchedule::Constant(0.0), Default::default(), 800)
            .unwrap();
        let e0 = orbital_energy(&tr.first().state, 1.2, 3.13);
        let e1 = orbital_energy(&tr.last().state, 1.2, 3.13);
        assert!((e0 - e1).abs() <= 1e-8, "{e0} vs {e1}");
    }

    #[test]
    fn matches_closed_form() {
        let p = params();
        let n = 700;
        let tr = integrate_trajectory(
            SagittalState::new(1.0, 0.6),
            &p,
            &ControlSchedule::Constant(0.0),
            Default::default(),
            n,
        )
        .unwrap();
        let exact = closed_form_state(1.0, 0.6, 1.2, 3.13, n as f64 * 1e-3);
        assert!((tr.last().state.x - exact.x).abs() < 1e-6);
        assert!((tr.last().state.xd - exact.xd).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_schedule_is_rejected() {
        let err = integrate_trajectory(
            SagittalState::new(1.0, 0.6),
            &params(),
            &ControlSchedule::PerSample(vec![0.0, 1.0, 4.0]),
            Default::default(),
            5,
        )
        .unwrap_err();
        assert!(matches!(err, PendulumError::TorqueOutOfBounds { .. }));
    }

    #[test]
    fn divergence_names_the_step() {
        let mut p = params();
        p.omega = 1e200;
        let err = integrate_trajectory(
            SagittalState::new(1.0, 0.6),
            &p,
            &ControlSchedule::Constant(0.0),
            Default::default(),
            10,
        )
        .unwrap_err();
        assert_eq!(err, PendulumError::Divergence { step: 1 });
    }

    #[test]
    fn constant_acceleration_scheme_is_first_order() {
        let p = params();
        let run = |dt: f64| {
            let n = (0.5 / dt).round() as usize;
            let tr = integrate_trajectory(
                SagittalState::new(1.0, 0.6),
                &p,
                &ControlSchedule::Constant(0.0),
                IntegratorOptions { dt, scheme: Scheme::ConstantAcceleration },
                n,
            )
            .unwrap();
            let exact = closed_form_state(1.0, 0.6, 1.2, 3.13, 0.5);
            (tr.last().state.x - exact.x).abs()
        };
        let ratio = run(2e-3) / run(1e-3);
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }
}
