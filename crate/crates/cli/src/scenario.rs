//! Scenario documents.
//!
//! A scenario is a TOML document. Every section is optional; omitted values
//! take the library defaults (the DP section defaults to the reference
//! problem: stages 0.9–1.5 m, velocities 0.03–1.5 m/s, 13 × 13 controls).
//!
//! ```toml
//! recovery = "dp"            # or "passive"
//!
//! [terrain]
//! kind = "random"            # "random", "flat" or "explicit"
//! n_steps = 7
//! seed = 3
//!
//! [automaton]
//! dt = 0.001
//! guard = "manifold"
//! contact = "multi_contact"
//!
//! [[disturbance]]
//! step = 2
//! trigger = { position = 0.85 }
//! dxd = 0.2
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use psl_core::automaton::{AutomatonConfig, Disturbance};
use psl_core::controller::DpConfig;
use psl_core::planner::{
    flat_terrain, generate_terrain, keyframes_for_terrain, ApexKeyframe, NominalOptions,
    TerrainParams, TerrainSpec, TerrainStep,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("could not serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid scenario: {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl ToString) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

/// Where the footholds come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainSource {
    /// Random step heights with a fixed tilt, drawn from `seed`.
    Random(TerrainParams),
    Flat(FlatTerrain),
    Explicit(ExplicitTerrain),
}

/// Level ground with evenly spaced feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatTerrain {
    pub n_steps: usize,
    #[serde(default = "default_step_length")]
    pub step_length: f64,
    #[serde(default = "default_com_height")]
    pub com_height: f64,
}

fn default_step_length() -> f64 {
    0.4
}

fn default_com_height() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTerrain {
    pub steps: Vec<TerrainStep>,
}

impl Default for TerrainSource {
    fn default() -> Self {
        Self::Random(TerrainParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    /// Disturbances are absorbed by the passive dynamics only.
    Passive,
    /// Sagittal pushes are handled by the DP policy or foot re-planning.
    #[default]
    Dp,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub terrain: TerrainSource,
    /// One per step; derived from the terrain when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyframes: Option<Vec<ApexKeyframe>>,
    pub planner: NominalOptions,
    pub automaton: AutomatonConfig,
    pub dp: DpConfig,
    pub recovery: RecoveryMode,
    #[serde(rename = "disturbance", skip_serializing_if = "Vec::is_empty")]
    pub disturbances: Vec<Disturbance>,
}

impl Scenario {
    pub fn terrain_spec(&self) -> Result<TerrainSpec, ScenarioError> {
        let spec = match &self.terrain {
            TerrainSource::Random(p) => generate_terrain(p).map_err(|e| invalid("terrain", e))?,
            TerrainSource::Flat(f) => flat_terrain(f.n_steps, f.step_length, f.com_height),
            TerrainSource::Explicit(e) => TerrainSpec { steps: e.steps.clone() },
        };
        spec.validate().map_err(|e| invalid("terrain", e))?;
        Ok(spec)
    }

    pub fn keyframes_for(&self, terrain: &TerrainSpec) -> Vec<ApexKeyframe> {
        self.keyframes
            .clone()
            .unwrap_or_else(|| keyframes_for_terrain(terrain))
    }

    pub fn step_count(&self) -> usize {
        match &self.terrain {
            TerrainSource::Random(p) => p.n_steps,
            TerrainSource::Flat(f) => f.n_steps,
            TerrainSource::Explicit(e) => e.steps.len(),
        }
    }

    /// Replaces the terrain seed. Only random terrain has one.
    pub fn set_seed(&mut self, seed: u64) -> Result<(), ScenarioError> {
        match &mut self.terrain {
            TerrainSource::Random(p) => {
                p.seed = seed;
                Ok(())
            }
            _ => Err(invalid("terrain.seed", "only random terrain takes a seed")),
        }
    }

    /// Uses `dt` for both manifold sampling and the simulation.
    pub fn set_dt(&mut self, dt: f64) {
        self.planner.dt = dt;
        self.automaton.dt = dt;
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.step_count();
        if n == 0 {
            return Err(invalid("terrain", "no steps"));
        }
        if let TerrainSource::Random(p) = &self.terrain {
            p.validate().map_err(|e| invalid("terrain", e))?;
        }
        if let Some(kf) = &self.keyframes {
            if kf.len() != n {
                return Err(invalid(
                    "keyframes",
                    format!("{} keyframes for {n} steps", kf.len()),
                ));
            }
        }
        if self.planner.dt.is_nan() || self.planner.dt <= 0.0 {
            return Err(invalid("planner.dt", "must be positive"));
        }
        self.automaton
            .validate()
            .map_err(|e| invalid("automaton", e))?;
        self.dp.validate().map_err(|e| invalid("dp", e))?;
        for (k, d) in self.disturbances.iter().enumerate() {
            if d.step >= n {
                return Err(invalid(
                    &format!("disturbance[{k}].step"),
                    format!("step {} outside 0..{n}", d.step),
                ));
            }
        }
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let s: Scenario = toml::from_str(text)?;
    s.validate()?;
    Ok(s)
}

pub fn serialize_scenario(s: &Scenario) -> Result<String, ScenarioError> {
    Ok(toml::to_string(s)?)
}
