use std::fs;
use std::path::Path;
use std::process::Command;

use psl_cli::export::{self, trajectory_csv, TRAJECTORY_HEADER};
use psl_cli::{import_mask, import_policy, parse_scenario, run_scenario};
use psl_core::automaton::{DiscreteMode, HybridTrace, RecoveryOutcome, TraceRecord};
use psl_core::controller::Control;
use psl_core::pendulum::{LateralState, SagittalState};

const FLAT7: &str = "[terrain]\nkind = \"flat\"\nn_steps = 7\n";

fn psl(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_psl"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("PSL_LOG", "error")
        .output()
        .expect("binary runs")
}

fn scenario_file(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn nominal_flat_walk_has_one_transition_per_boundary() {
    let report = run_scenario(&parse_scenario(FLAT7).unwrap()).unwrap();
    assert!(report.completed());
    assert_eq!(report.transitions.len(), 6);
    assert!(report.disturbances.is_empty());
    assert_eq!(report.replan_count(), 0);
}

#[test]
fn long_random_terrain_completes() {
    let s = parse_scenario("[terrain]\nkind = \"random\"\nn_steps = 100\nseed = 4\n").unwrap();
    let report = run_scenario(&s).unwrap();
    assert!(report.completed(), "{:?}", report.trace.failure);
    assert_eq!(report.transitions.len(), 99);
}

#[test]
fn a_large_sagittal_push_replans_one_foot() {
    let doc = format!("{FLAT7}[[disturbance]]\nstep = 2\ntrigger = {{ position = 0.85 }}\ndxd = 0.3\n");
    let report = run_scenario(&parse_scenario(&doc).unwrap()).unwrap();
    assert!(report.completed(), "{:?}", report.trace.failure);
    assert_eq!(report.replan_count(), 1);
    assert!(matches!(report.disturbances[0].outcome, RecoveryOutcome::Replanned { .. }));
    assert!(report.disturbances[0].kappa.is_some());
    assert!(report.summary().contains("replanned"));
}

#[test]
fn single_sample_trace_exports_two_lines() {
    let record = TraceRecord {
        t: 0.0,
        zeta: 0.0,
        step: 0,
        mode: DiscreteMode::LeftSupport,
        sagittal: SagittalState::new(0.0, 0.6),
        lateral: LateralState::new(0.1, 0.0),
        z: 1.0,
        control: Control::new(3.13, 0.0),
        sigma: 0.0,
        events: Vec::new(),
    };
    let trace = HybridTrace {
        records: vec![record],
        ..Default::default()
    };
    let text = trajectory_csv(&trace).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.ends_with('\n'));
    assert!(trajectory_csv(&HybridTrace::default()).is_err());
}

#[test]
fn events_appear_only_on_transition_rows() {
    let doc = format!("{FLAT7}[[disturbance]]\nstep = 3\ntrigger = {{ position = 1.25 }}\ndyd = 0.05\n");
    let report = run_scenario(&parse_scenario(&doc).unwrap()).unwrap();
    let text = trajectory_csv(&report.trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
    let with_events: Vec<usize> = lines
        .enumerate()
        .filter(|(_, l)| !l.ends_with(','))
        .map(|(i, _)| i)
        .collect();
    let mut expected: Vec<usize> = report.trace.transitions.iter().map(|t| t.record).collect();
    expected.extend(report.trace.disturbances.iter().map(|d| d.record));
    expected.sort();
    assert_eq!(with_events, expected);
}

#[test]
fn walk_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario_file(dir.path(), "[terrain]\nkind = \"random\"\nn_steps = 9\n[automaton]\ncontact = \"multi_contact\"\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = psl(&["walk", "--scenario", &scen, "--seed", "5"], out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["trajectory.csv", "report.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let c = dir.path().join("c");
    psl(&["walk", "--scenario", &scen, "--seed", "6"], &c);
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(c.join("trajectory.csv")).unwrap());
}

#[test]
fn grid_exports_reimport_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let scen = scenario_file(
        dir.path(),
        "[dp.stage]\nmin = 1.0\nmax = 1.3\nres = 0.02\n[dp.state]\nmin = 0.3\nmax = 1.2\nres = 0.02\n",
    );
    let o = psl(&["bundle", "--scenario", &scen], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let policy_path = dir.path().join("policy.grid");
    let mask_path = dir.path().join("mask.grid");
    let table = import_policy(&policy_path).unwrap();
    let mask = import_mask(&mask_path).unwrap();
    assert_eq!(mask.cells.len(), 16 * 46);
    assert_eq!(table.entries.len(), 16 * 46);
    let again = dir.path().join("again");
    fs::create_dir(&again).unwrap();
    export::export_policy(&table, &again.join("policy.grid")).unwrap();
    export::export_mask(&mask, &again.join("mask.grid")).unwrap();
    assert_eq!(fs::read(&policy_path).unwrap(), fs::read(again.join("policy.grid")).unwrap());
    assert_eq!(fs::read(&mask_path).unwrap(), fs::read(again.join("mask.grid")).unwrap());
}

#[test]
fn plan_and_terrain_subcommands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = psl(&["terrain", "--seed", "2"], dir.path());
    assert!(o.status.success());
    let terrain = fs::read_to_string(dir.path().join("terrain.csv")).unwrap();
    assert_eq!(terrain.lines().count(), 8);
    let o = psl(&["plan", "--dt", "0.002"], dir.path());
    assert!(o.status.success());
    let transitions = fs::read_to_string(dir.path().join("transitions.csv")).unwrap();
    assert_eq!(transitions.lines().count(), 7);
    assert!(fs::metadata(dir.path().join("manifolds.csv")).unwrap().len() > 0);
}

#[test]
fn exit_codes_separate_usage_and_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(psl(&["fly"], dir.path()).status.code(), Some(2));
    assert_eq!(psl(&["walk", "--dt", "-1"], dir.path()).status.code(), Some(2));
    let bad = scenario_file(dir.path(), "[terrain]\nkind = \"flat\"\nn_stepz = 3\n");
    let o = psl(&["walk", "--scenario", &bad], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_stepz"));
    let missing = dir.path().join("nope.toml").display().to_string();
    assert_eq!(psl(&["plan", "--scenario", &missing], dir.path()).status.code(), Some(2));

    // A sideways shove larger than the foot search can absorb ends the walk.
    let fall = scenario_file(
        dir.path(),
        "recovery = \"passive\"\n[terrain]\nkind = \"flat\"\nn_steps = 6\n[automaton]\nlateral_range = 0.05\nmax_lateral_offset = 0.4\n[[disturbance]]\nstep = 2\ntrigger = { progression = 0.1 }\ndyd = 1.5\n",
    );
    let o = psl(&["disturb", "--scenario", &fall], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("trajectory.csv").exists());
    assert_eq!(psl(&["walk"], dir.path()).status.code(), Some(0));
}
