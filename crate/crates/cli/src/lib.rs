//! Scenario files, run orchestration and file exports for the `psl` tool.

pub mod export;
pub mod run;
pub mod scenario;

pub use export::{
    export_mask, export_policy, export_trajectory, import_mask, import_policy, ExportError,
};
pub use run::{plan_scenario, run_scenario, RunError, RunReport};
pub use scenario::{
    parse_scenario, serialize_scenario, ExplicitTerrain, FlatTerrain, RecoveryMode, Scenario,
    ScenarioError, TerrainSource,
};
