use serde::{Deserialize, Serialize};

use super::PendulumError;

/// Lateral-invariant CoM path surface `z = slope·x + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSurface {
    /// Slope `a` [dimensionless].
    pub slope: f64,
    /// Height offset `b` [m].
    pub offset: f64,
}

impl PathSurface {
    pub fn new(slope: f64, offset: f64) -> Self {
        Self { slope, offset }
    }

    pub fn flat(height: f64) -> Self {
        Self::new(0.0, height)
    }

    /// Surface of slope `slope` that passes `z_apex` above the given foot.
    pub fn through_apex(slope: f64, foot: &FootPosition, z_apex: f64) -> Self {
        Self::new(slope, foot.z + z_apex - slope * foot.x)
    }

    pub fn height(&self, x: f64) -> f64 {
        surface_height(self, x)
    }

    /// Vertical CoM-to-foot distance when the CoM passes over the foot.
    pub fn apex_height(&self, foot: &FootPosition) -> f64 {
        self.slope * foot.x + self.offset - foot.z
    }
}

/// Contact point of the stance foot [m].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FootPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FootPosition {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

pub fn surface_height(surface: &PathSurface, x: f64) -> f64 {
    surface.slope * x + surface.offset
}

/// Asymptotic slope `√(g / z_apex)` of the phase portrait for one contact.
pub fn omega_from_surface(
    surface: &PathSurface,
    foot: &FootPosition,
    g: f64,
) -> Result<f64, PendulumError> {
    let z_apex = surface.apex_height(foot);
    if !(z_apex > 0.0) {
        return Err(PendulumError::Geometry { z_apex });
    }
    Ok((g / z_apex).sqrt())
}
