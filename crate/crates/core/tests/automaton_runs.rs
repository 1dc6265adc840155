use psl_core::automaton::*;
use psl_core::pendulum::LateralState;
use psl_core::planner::*;

fn flat_plan(n: usize) -> NominalPlan {
    let t = flat_terrain(n, 0.4, 1.0);
    let kf = vec![ApexKeyframe::new(0.6, 1.0); n];
    generate_nominal(&t, &kf, &Default::default()).unwrap()
}

fn rough_plan(n: usize, seed: u64) -> NominalPlan {
    let terrain = generate_terrain(&TerrainParams { n_steps: n, seed, ..Default::default() }).unwrap();
    generate_nominal(&terrain, &keyframes_for_terrain(&terrain), &Default::default()).unwrap()
}

fn lateral_push(step: usize, dyd: f64) -> Disturbance {
    Disturbance {
        step,
        trigger: Trigger::Progression(0.1),
        dxd: 0.0,
        dyd,
    }
}

#[test]
fn replaying_a_run_is_bitwise_identical() {
    let plan = rough_plan(12, 7);
    let pushes = [
        Disturbance {
            step: 3,
            trigger: Trigger::Position(1.25),
            dxd: 0.05,
            dyd: 0.0,
        },
        lateral_push(6, -0.03),
    ];
    let cfg = AutomatonConfig {
        contact: ContactModel::MultiContact,
        ..Default::default()
    };
    let a = run_plan(&plan, &cfg, &pushes, &mut DpRecovery::default());
    let b = run_plan(&plan, &cfg, &pushes, &mut DpRecovery::default());
    assert!(a.completed(), "{:?}", a.failure);
    assert_eq!(a, b);
}

#[test]
fn same_side_pushes_drift_but_stay_bounded() {
    let plan = rough_plan(60, 0);
    let pushes: Vec<Disturbance> = (1..6).map(|k| lateral_push(8 * k, 0.04)).collect();
    let trace = run_plan(&plan, &AutomatonConfig::default(), &pushes, &mut DpRecovery::default());
    assert!(trace.completed(), "{:?}", trace.failure);
    assert_eq!(trace.transitions.len(), 59);
    let worst = trace.lateral_excursion_by_step().into_iter().fold(0.0, f64::max);
    assert!(worst < 0.5, "lateral excursion {worst}");
    for tr in &trace.transitions {
        let r = &trace.records[tr.record];
        assert!((r.lateral.y - tr.foot.y).abs() < 0.3);
    }
}

#[test]
fn a_large_sideways_push_is_reported_as_a_fall() {
    let plan = flat_plan(6);
    let cfg = AutomatonConfig {
        lateral_range: 0.05,
        max_lateral_offset: 0.4,
        ..Default::default()
    };
    let trace = run_plan(&plan, &cfg, &[lateral_push(2, 1.5)], &mut PassiveRecovery);
    let f = trace.failure.expect("the walk should fail");
    assert!(matches!(f.error, AutomatonError::Diverged { .. }), "{}", f.error);
}

#[test]
fn initial_lateral_error_is_absorbed() {
    let plan = flat_plan(8);
    let cfg = AutomatonConfig {
        initial_lateral: LateralState::new(0.03, -0.05),
        ..Default::default()
    };
    let trace = run_plan(&plan, &cfg, &[], &mut PassiveRecovery);
    assert!(trace.completed(), "{:?}", trace.failure);
    let exc = trace.lateral_excursion_by_step();
    let early = exc[..3].iter().copied().fold(0.0, f64::max);
    assert!(exc[3..].iter().all(|&e| e <= early * 1.05), "{exc:?}");
}

#[test]
fn guard_kinds_all_finish_the_walk() {
    let plan = rough_plan(10, 2);
    for guard in [GuardKind::Position, GuardKind::Velocity, GuardKind::Progression, GuardKind::Manifold] {
        let cfg = AutomatonConfig {
            guard,
            ..Default::default()
        };
        let trace = run_plan(&plan, &cfg, &[], &mut PassiveRecovery);
        assert!(trace.completed(), "{guard:?}: {:?}", trace.failure);
        assert_eq!(trace.transitions.len(), 9);
        assert!(trace.records.windows(2).all(|w| w[1].t > w[0].t && w[1].zeta >= w[0].zeta));
    }
}
