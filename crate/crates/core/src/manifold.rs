//! Phase-space tangent (`σ`) and cotangent (`ζ`) fields.
//!
//! `σ` measures deviation from a nominal pendulum trajectory and vanishes on
//! it; `ζ` is a progression coordinate whose level sets cross the `σ` level
//! sets at right angles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pendulum::SagittalState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("cotangent field undefined: {0}")]
    Domain(&'static str),
    #[error("sensitivity norm needs at least two samples, got {0}")]
    InsufficientData(usize),
    #[error("invalid progression interval [{from}, {to}]")]
    InvalidInterval { from: f64, to: f64 },
    #[error("samples cover [{first}, {last}] but the interval is [{from}, {to}]")]
    NotCovered {
        first: f64,
        last: f64,
        from: f64,
        to: f64,
    },
}

/// Nominal manifold through the apex `(x_foot, xdot_apex)` of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDescriptor {
    /// Apex velocity [m/s].
    pub xdot_apex: f64,
    /// Sagittal foot position [m].
    pub x_foot: f64,
    /// Asymptotic slope [1/s].
    pub omega: f64,
}

impl ManifoldDescriptor {
    pub fn new(xdot_apex: f64, x_foot: f64, omega: f64) -> Self {
        Self {
            xdot_apex,
            x_foot,
            omega,
        }
    }

    pub fn sigma(&self, s: &SagittalState) -> f64 {
        sigma_apex(s, self)
    }

    /// Squared velocity of the nominal manifold at `x`.
    pub fn xdot_squared_at(&self, x: f64) -> f64 {
        let dx = x - self.x_foot;
        self.xdot_apex * self.xdot_apex + self.omega * self.omega * dx * dx
    }

    /// Forward (positive) velocity of the nominal manifold at `x`.
    pub fn xdot_at(&self, x: f64) -> f64 {
        self.xdot_squared_at(x).sqrt()
    }

    /// `ẋ_apex⁴ / ω²`, the natural scale of `σ` used for tolerances.
    pub fn sigma_scale(&self) -> f64 {
        self.xdot_apex.powi(4) / (self.omega * self.omega)
    }
}

/// Invariant bundle `|σ| ≤ ε` around a manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub epsilon: f64,
}

impl BundleSpec {
    pub fn new(epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "bundle width must be positive");
        Self { epsilon }
    }

    pub fn contains(&self, sigma: f64) -> bool {
        bundle_contains(sigma, self)
    }
}

/// Tangent manifold through an arbitrary initial condition `(x0, xd0)`.
pub fn sigma_general(s: &SagittalState, x0: f64, xd0: f64, x_foot: f64, omega: f64) -> f64 {
    let (x, xd) = (s.x, s.xd);
    let w2 = omega * omega;
    let d0 = x0 - x_foot;
    let d = x - x_foot;
    d0 * d0 * (2.0 * xd0 * xd0 - xd * xd + w2 * (x - x0) * (x + x0 - 2.0 * x_foot))
        - xd0 * xd0 * d * d
        + xd0 * xd0 * (xd * xd - xd0 * xd0) / w2
}

/// Tangent manifold through the apex; positive above the nominal curve.
pub fn sigma_apex(s: &SagittalState, m: &ManifoldDescriptor) -> f64 {
    let w2 = m.omega * m.omega;
    let va2 = m.xdot_apex * m.xdot_apex;
    let d = s.x - m.x_foot;
    va2 / w2 * (s.xd * s.xd - va2 - w2 * d * d)
}

/// Cotangent manifold `ζ0 (ẋ/ẋ0)^(ω²) (x − x_foot)/(x0 − x_foot)`.
pub fn zeta(
    s: &SagittalState,
    x0: f64,
    xd0: f64,
    x_foot: f64,
    omega: f64,
    zeta0: f64,
) -> Result<f64, ManifoldError> {
    if xd0 == 0.0 {
        return Err(ManifoldError::Domain("reference velocity is zero"));
    }
    if x0 == x_foot {
        return Err(ManifoldError::Domain("reference position is at the foot"));
    }
    let ratio = s.xd / xd0;
    if ratio < 0.0 {
        return Err(ManifoldError::Domain("velocity changed sign"));
    }
    Ok(zeta0 * ratio.powf(omega * omega) * (s.x - x_foot) / (x0 - x_foot))
}

/// RMS of `σ` over `[zeta_d, zeta_trans]`, by the trapezoid rule on `(ζ, σ)`
/// samples ordered by `ζ`. Samples are clipped to the interval with linear
/// interpolation at its ends.
pub fn sensitivity_norm(
    samples: &[(f64, f64)],
    zeta_d: f64,
    zeta_trans: f64,
) -> Result<f64, ManifoldError> {
    if samples.len() < 2 {
        return Err(ManifoldError::InsufficientData(samples.len()));
    }
    if !(zeta_trans > zeta_d) {
        return Err(ManifoldError::InvalidInterval {
            from: zeta_d,
            to: zeta_trans,
        });
    }
    let (first, last) = (samples[0].0, samples[samples.len() - 1].0);
    let slack = 1e-12 * (zeta_trans - zeta_d).max(1.0);
    if first > zeta_d + slack || last < zeta_trans - slack {
        return Err(ManifoldError::NotCovered {
            first,
            last,
            from: zeta_d,
            to: zeta_trans,
        });
    }
    let mut integral = 0.0;
    for w in samples.windows(2) {
        let ((z0, s0), (z1, s1)) = (w[0], w[1]);
        let lo = z0.max(zeta_d);
        let hi = z1.min(zeta_trans);
        if !(hi > lo) {
            continue;
        }
        let at = |z: f64| s0 + (s1 - s0) * (z - z0) / (z1 - z0);
        let (a, b) = (at(lo), at(hi));
        // (σ²) is not linear across the segment; integrate the square of the
        // linear interpolant exactly.
        integral += (hi - lo) * (a * a + a * b + b * b) / 3.0;
    }
    Ok((integral / (zeta_trans - zeta_d)).sqrt())
}

/// Boundary-inclusive membership in the invariant bundle.
pub fn bundle_contains(sigma: f64, spec: &BundleSpec) -> bool {
    sigma.abs() <= spec.epsilon
}
