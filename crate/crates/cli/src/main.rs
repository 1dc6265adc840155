use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psl_cli::export::{self, write_file};
use psl_cli::{plan_scenario, run_scenario, Scenario};
use psl_core::controller::{estimate_recoverability, solve_dp};

#[derive(Parser)]
#[command(name = "psl", version, about = "Phase-space planning and push recovery for bipedal walking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML). Library defaults are used when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the random terrain seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the integration step [s] of the planner and the simulation.
    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the footholds and surfaces: terrain.csv.
    Terrain,
    /// Write the nominal plan: manifolds.csv, transitions.csv.
    Plan,
    /// Walk the plan without disturbances: trajectory.csv, report.toml.
    Walk,
    /// Walk the plan with the scenario's pushes: trajectory.csv, report.toml.
    Disturb,
    /// Solve the recovery DP: policy.grid.
    Dp,
    /// Estimate the recoverability bundle: policy.grid, mask.grid.
    Bundle,
}

enum Failure {
    Usage(String),
    Domain(String),
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn load(cli: &Cli) -> Result<Scenario, Failure> {
    let mut s = match &cli.scenario {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            psl_cli::parse_scenario(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.set_seed(seed).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(dt) = cli.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Failure::Usage(format!("--dt must be positive, got {dt}")));
        }
        s.set_dt(dt);
    }
    s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(s)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    write_file(&path, text).map_err(domain)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn walk(s: &Scenario, out: &Path) -> Result<(), Failure> {
    let report = run_scenario(s).map_err(domain)?;
    write(out, "trajectory.csv", &export::trajectory_csv(&report.trace).map_err(domain)?)?;
    write(out, "report.toml", &report.summary())?;
    println!(
        "{} transitions, {} pushes, {} replans, plan {:.3} s, walk {:.3} s",
        report.transitions.len(),
        report.disturbances.len(),
        report.replan_count(),
        report.timings.plan.as_secs_f64(),
        report.timings.run.as_secs_f64()
    );
    match &report.trace.failure {
        Some(f) => Err(Failure::Domain(format!("walk stopped at t = {:.3} s in step {}: {}", f.t, f.step, f.error))),
        None => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let mut s = load(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Domain(format!("{}: {e}", cli.out.display())))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Terrain => {
            let t = s.terrain_spec().map_err(domain)?;
            write(out, "terrain.csv", &export::terrain_csv(&t))
        }
        Command::Plan => {
            let plan = plan_scenario(&s).map_err(domain)?;
            write(out, "manifolds.csv", &export::manifolds_csv(&plan))?;
            write(out, "transitions.csv", &export::transitions_csv(&plan))
        }
        Command::Walk => {
            s.disturbances.clear();
            walk(&s, out)
        }
        Command::Disturb => {
            if s.disturbances.is_empty() {
                log::warn!("the scenario schedules no disturbances");
            }
            walk(&s, out)
        }
        Command::Dp => {
            let table = solve_dp(&s.dp).map_err(domain)?;
            write(out, "policy.grid", &export::policy_text(&table))
        }
        Command::Bundle => {
            let (table, mask) = estimate_recoverability(&s.dp, s.automaton.epsilon, s.automaton.dt).map_err(domain)?;
            write(out, "policy.grid", &export::policy_text(&table))?;
            write(out, "mask.grid", &export::mask_text(&mask))?;
            println!(
                "{} of {} cells recoverable",
                mask.recoverable_count(),
                mask.cells.len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PSL_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
