use std::path::PathBuf;

use rnav_core::geometry::{Obstacle, Pose, Target, World};
use rnav_core::harness::{
    apply_event, batch, batch_sequential, load_scenario, run, EventAction, Policy, RunMode,
    Scenario, ScenarioError, TerminalReason, Trace, TraceRecord, Transport, Trigger,
};

fn scenario(name: &str) -> Scenario {
    load_scenario(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.json")),
    )
    .unwrap()
}

fn run_in_process(s: &Scenario, seed: u64) -> Trace {
    run(s, seed, &RunMode::InProcess, &Policy::default())
        .unwrap()
        .1
}

#[test]
fn minimal_scenario_takes_defaults() {
    let s = Scenario::from_json(
        r#"{"name":"m","start_pose":{"x":0,"y":0,"heading":0},"target":{"x":3,"y":0}}"#,
    )
    .unwrap();
    assert_eq!(s.max_cycles, 200);
    assert_eq!(s.target.reach_radius, 0.4);
    assert!(s.obstacles.is_empty() && s.events.is_empty());
    assert_eq!(s.params, Default::default());
}

#[test]
fn missing_target_is_named() {
    let err =
        Scenario::from_json(r#"{"name":"m","start_pose":{"x":0,"y":0,"heading":0}}"#).unwrap_err();
    assert!(matches!(err, ScenarioError::Schema(_)));
    assert!(err.to_string().contains("target"), "{err}");
}

#[test]
fn start_inside_obstacle_is_invalid() {
    let err = Scenario::from_json(
        r#"{"name":"m","start_pose":{"x":0,"y":0,"heading":0},"target":{"x":3,"y":0},
            "obstacles":[{"x":0.1,"y":0,"r":0.5,"tall":true}]}"#,
    )
    .unwrap_err();
    assert!(matches!(err, ScenarioError::Invalid(_)), "{err}");
}

#[test]
fn experiment_2_has_one_detection_trigger() {
    let s = scenario("exp2");
    assert_eq!(s.events.len(), 1);
    assert_eq!(s.events[0].trigger, Trigger::OnFirstDetection);
    assert!(matches!(
        s.events[0].action,
        EventAction::AddObstacleOnPath { .. }
    ));
}

#[test]
fn scenario_json_round_trip() {
    for name in ["exp1", "exp2"] {
        let s = scenario(name);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }
}

fn empty_world() -> World {
    World::new(
        Pose::new(0.0, 0.0, 0.0),
        vec![],
        Target {
            x: 5.0,
            y: 0.0,
            reach_radius: 0.4,
        },
        1,
    )
}

#[test]
fn apply_event_appends() {
    let mut w = empty_world();
    apply_event(&mut w, Obstacle::new(1.0, 0.0, 0.3, true)).unwrap();
    assert_eq!(w.obstacles.len(), 1);
}

#[test]
fn apply_event_rejects_obstacle_on_robot() {
    let mut w = empty_world();
    assert!(apply_event(&mut w, Obstacle::new(0.0, 0.0, 0.3, true)).is_err());
    assert!(w.obstacles.is_empty());
}

#[test]
fn seed_42_regression() {
    let s = scenario("exp1");
    let (report, _) = run(&s, 42, &RunMode::InProcess, &Policy::default()).unwrap();
    assert!(report.reached);
    assert_eq!(report.cycles_used, 8);
    assert_eq!(report.reason, TerminalReason::Reached);
}

#[test]
fn zero_budget_stops_immediately() {
    let mut s = scenario("exp1");
    s.max_cycles = 0;
    let (report, trace) = run(&s, 1, &RunMode::InProcess, &Policy::default()).unwrap();
    assert!(!report.reached);
    assert_eq!(report.reason, TerminalReason::CycleBudget);
    assert_eq!(trace.cycles().count(), 0);
}

#[test]
fn traces_are_well_formed() {
    for name in ["exp1", "exp2"] {
        let s = scenario(name);
        for seed in 1..=30 {
            let t = run_in_process(&s, seed);
            assert!(matches!(
                t.records.first(),
                Some(TraceRecord::Header { .. })
            ));
            let terminals = t
                .records
                .iter()
                .filter(|r| matches!(r, TraceRecord::Terminal(_)))
                .count();
            assert_eq!(terminals, 1);
            assert!(matches!(t.records.last(), Some(TraceRecord::Terminal(_))));
            let cycles: Vec<u32> = t.cycles().map(|c| c.cycle).collect();
            assert!(
                cycles.windows(2).all(|w| w[0] < w[1]),
                "{name} seed {seed}: {cycles:?}"
            );
            let term = t.terminal().unwrap();
            let dist = term.final_pose.position().distance(s.target.position());
            assert_eq!(
                term.reached,
                dist <= s.target.reach_radius,
                "{name} seed {seed}"
            );
            let reparsed = Trace::from_jsonl(t.to_jsonl().as_bytes()).unwrap();
            assert_eq!(reparsed.to_jsonl(), t.to_jsonl());
        }
    }
}

#[test]
fn detection_event_fires_once() {
    let s = scenario("exp2");
    for seed in 1..=30 {
        let t = run_in_process(&s, seed);
        let events: Vec<_> = t.events().collect();
        assert_eq!(events.len(), 1, "seed {seed}");
        assert!(events[0].accepted);
        let first_found = t
            .cycles()
            .find(|c| c.look.is_some_and(|l| l.found))
            .unwrap()
            .cycle;
        assert_eq!(events[0].cycle, first_found);
    }
}

#[test]
fn path_length_matches_poses() {
    let s = scenario("exp2");
    let (report, t) = run(&s, 5, &RunMode::InProcess, &Policy::default()).unwrap();
    let mut prev = s.start_pose.position();
    let mut lower_bound = 0.0;
    for c in t.cycles() {
        lower_bound += prev.distance(c.pose_after.position());
        prev = c.pose_after.position();
    }
    // straight-line hops between cycle ends never exceed the travelled path
    assert!(report.path_length + 1e-9 >= lower_bound);
    assert!(report.path_length < lower_bound * 1.5 + 0.5);
}

#[test]
fn repeated_runs_are_identical() {
    let s = scenario("exp2");
    for mode in [RunMode::InProcess, RunMode::Socket(Transport::Memory)] {
        let a = run(&s, 9, &mode, &Policy::default()).unwrap().1.to_jsonl();
        let b = run(&s, 9, &mode, &Policy::default()).unwrap().1.to_jsonl();
        assert_eq!(a, b);
    }
}

#[test]
fn single_seed_batch_equals_its_run() {
    let s = scenario("exp1");
    let (report, _) = run(&s, 3, &RunMode::InProcess, &Policy::default()).unwrap();
    let summary = batch_sequential(&s, &[3], &Policy::default());
    assert_eq!(summary.runs, 1);
    assert_eq!(summary.success_rate, if report.reached { 1.0 } else { 0.0 });
    assert_eq!(summary.mean_cycles, f64::from(report.cycles_used));
    assert_eq!(summary.mean_path_length, report.path_length);
}

#[test]
fn noise_free_repeated_seed_gives_identical_aggregates() {
    let mut s = scenario("exp1");
    s.params.motion.noise_sigma = 0.0;
    s.params.sensors.false_negative_rate = 0.0;
    let a = batch(&s, &[7, 7, 7], &Policy::default());
    let b = batch(&s, &[7, 7, 7], &Policy::default());
    assert_eq!(a, b);
    assert!(a.reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn parallel_and_sequential_batches_agree() {
    let s = scenario("exp2");
    let seeds: Vec<u64> = (1..=20).collect();
    assert_eq!(
        batch(&s, &seeds, &Policy::default()),
        batch_sequential(&s, &seeds, &Policy::default())
    );
}
