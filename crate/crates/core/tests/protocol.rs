use std::io::BufReader;
use std::thread;

use proptest::prelude::*;

use rnav_core::actions::ActionCommand;
use rnav_core::decision::{DecisionState, DirectDecision};
use rnav_core::protocol::{
    duplex, run_decision_client, run_executor_session, ExecStatus, Executor, ProtocolError,
    SessionEnd, SessionReport,
};
use rnav_core::sensors::{LookOutcome, PerceptionRecord};

fn rec(direction: f64, obstacle: bool) -> PerceptionRecord {
    PerceptionRecord {
        direction,
        x: 0.0,
        y: 0.0,
        obstacle,
    }
}

/// Robot side that replays fixed perceptions and always sees the target
/// at a fixed bearing.
struct Scripted {
    sensors: Vec<PerceptionRecord>,
    /// Keep sensing after the script runs out.
    endless: bool,
    bearing: Option<f64>,
    executed: Vec<ActionCommand>,
}

impl Scripted {
    fn new(sensors: Vec<PerceptionRecord>, bearing: Option<f64>) -> Self {
        Self {
            sensors,
            endless: false,
            bearing,
            executed: Vec::new(),
        }
    }

    fn endless() -> Self {
        Self {
            endless: true,
            ..Self::new(Vec::new(), Some(45.0))
        }
    }
}

impl Executor for Scripted {
    fn sense(&mut self) -> Option<PerceptionRecord> {
        if self.sensors.is_empty() {
            return self.endless.then(|| rec(90.0, false));
        }
        Some(self.sensors.remove(0))
    }
    fn look(&mut self) -> LookOutcome {
        self.bearing
            .map_or(LookOutcome::NOT_FOUND, LookOutcome::found)
    }
    fn execute(&mut self, command: ActionCommand) -> ExecStatus {
        self.executed.push(command);
        ExecStatus::Continue
    }
}

fn client_output(input: &str) -> (SessionReport, String) {
    let mut d = DecisionState::builtin();
    let mut out = Vec::new();
    let r = run_decision_client(&mut d, &mut BufReader::new(input.as_bytes()), &mut out);
    (r, String::from_utf8(out).unwrap())
}

#[test]
fn client_first_two_cycles_without_target() {
    let (r, out) = client_output("90.000,0.000,0.000,0\n90.000,0.000,0.000,0\nfalse,0.000\n");
    assert_eq!(out, "none\nlooking_Qbo\nforward_Qbo(90.000)\n");
    assert_eq!(
        r,
        SessionReport {
            cycles: 2,
            end: SessionEnd::PeerClosed
        }
    );
}

#[test]
fn client_steers_to_found_bearing() {
    let (_, out) = client_output("90.000,0.000,0.000,0\n90.000,0.000,0.000,0\ntrue,30.000\n");
    assert_eq!(out, "none\nlooking_Qbo\nforward_Qbo(30.000)\n");
}

#[test]
fn client_on_empty_stream() {
    let (r, out) = client_output("");
    assert_eq!(
        r,
        SessionReport {
            cycles: 0,
            end: SessionEnd::PeerClosed
        }
    );
    assert!(out.is_empty());
}

#[test]
fn client_rejects_a_command_where_a_sensor_line_belongs() {
    let (r, _) = client_output("forward_Qbo(10.000)\n");
    assert!(
        matches!(
            r.end,
            SessionEnd::Error(ProtocolError::UnexpectedKind { .. })
        ),
        "{r:?}"
    );
}

#[test]
fn executor_first_two_exchanges() {
    let mut exec = Scripted::new(vec![rec(90.0, false), rec(90.0, false)], None);
    let mut out = Vec::new();
    let input = "none\nlooking_Qbo\nforward_Qbo(90.000)\n";
    let r = run_executor_session(&mut exec, &mut BufReader::new(input.as_bytes()), &mut out);
    assert_eq!(
        r,
        SessionReport {
            cycles: 2,
            end: SessionEnd::Stopped
        }
    );
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "90.000,0.000,0.000,0\n90.000,0.000,0.000,0\nfalse,0.000\n"
    );
    assert_eq!(
        exec.executed,
        vec![ActionCommand::None, ActionCommand::Forward(90.0)]
    );
}

#[test]
fn executor_reports_peer_closed() {
    let mut exec = Scripted::endless();
    let r = run_executor_session(
        &mut exec,
        &mut BufReader::new(&b"none\n"[..]),
        &mut Vec::new(),
    );
    assert_eq!(
        r,
        SessionReport {
            cycles: 1,
            end: SessionEnd::PeerClosed
        }
    );
}

#[test]
fn executor_aborts_on_bad_angle() {
    let mut exec = Scripted::endless();
    let r = run_executor_session(
        &mut exec,
        &mut BufReader::new(&b"forward_Qbo(xyz)\n"[..]),
        &mut Vec::new(),
    );
    match r.end {
        SessionEnd::Error(ProtocolError::Decode { line, .. }) => {
            assert_eq!(line, "forward_Qbo(xyz)")
        }
        other => panic!("{other:?}"),
    }
    assert!(exec.executed.is_empty());
}

#[test]
fn rules_client_against_executor_over_memory() {
    let (mut a, mut b) = duplex();
    let client = thread::spawn(move || {
        let mut d = DecisionState::builtin();
        run_decision_client(&mut d, &mut b.reader, &mut b.writer)
    });
    let mut exec = Scripted::new(
        vec![rec(90.0, false), rec(90.0, true), rec(90.0, false)],
        None,
    );
    let r = run_executor_session(&mut exec, &mut a.reader, &mut a.writer);
    drop(a);
    assert_eq!(r.cycles, 3);
    assert_eq!(client.join().unwrap().cycles, 3);
    assert_eq!(
        exec.executed,
        vec![
            ActionCommand::None,
            ActionCommand::Search(90.0),
            ActionCommand::Forward(90.0)
        ]
    );
}

#[derive(Debug, Clone, Copy)]
enum Line {
    Sensor,
    Reply,
    Look,
    Act,
}

impl Line {
    fn text(self) -> &'static str {
        match self {
            Line::Sensor => "10.000,1.000,2.000,0\n",
            Line::Reply => "true,20.000\n",
            Line::Look => "looking_Qbo\n",
            Line::Act => "forward_Qbo(20.000)\n",
        }
    }
}

fn line() -> impl Strategy<Value = Line> {
    prop_oneof![
        Just(Line::Sensor),
        Just(Line::Reply),
        Just(Line::Look),
        Just(Line::Act)
    ]
}

/// What the executor must conclude from a stream of client lines: the
/// number of completed cycles and whether a violation is detected.
fn executor_oracle(lines: &[Line]) -> (u64, bool) {
    let (mut cycles, mut looked) = (0, false);
    for l in lines {
        match l {
            Line::Sensor | Line::Reply => return (cycles, true),
            Line::Look if looked => return (cycles, true),
            Line::Look => looked = true,
            Line::Act => {
                cycles += 1;
                looked = false;
            }
        }
    }
    (cycles, false)
}

/// Same for the direct decision client, which looks on every cycle after
/// the first.
fn client_oracle(lines: &[Line]) -> (u64, bool) {
    let mut cycles = 0;
    let mut it = lines.iter();
    while let Some(l) = it.next() {
        if !matches!(l, Line::Sensor) {
            return (cycles, true);
        }
        if cycles > 0 && !matches!(it.next(), Some(Line::Reply)) {
            return (cycles, true);
        }
        cycles += 1;
    }
    (cycles, false)
}

proptest! {
    #[test]
    fn executor_detects_misordered_commands(lines in prop::collection::vec(line(), 0..20)) {
        let input: String = lines.iter().map(|l| l.text()).collect();
        let mut exec = Scripted::endless();
        let r = run_executor_session(&mut exec, &mut BufReader::new(input.as_bytes()), &mut Vec::new());
        let (cycles, violation) = executor_oracle(&lines);
        prop_assert_eq!(r.cycles, cycles);
        prop_assert_eq!(matches!(r.end, SessionEnd::Error(_)), violation);
        if !violation {
            prop_assert_eq!(r.end, SessionEnd::PeerClosed);
        }
    }

    #[test]
    fn client_detects_misordered_replies(lines in prop::collection::vec(line(), 0..20)) {
        let input: String = lines.iter().map(|l| l.text()).collect();
        let mut d = DirectDecision::new();
        let r = run_decision_client(&mut d, &mut BufReader::new(input.as_bytes()), &mut Vec::new());
        let (cycles, violation) = client_oracle(&lines);
        prop_assert_eq!(r.cycles, cycles);
        prop_assert_eq!(matches!(r.end, SessionEnd::Error(_)), violation);
    }

    #[test]
    fn well_formed_sessions_never_fail(n in 1usize..30, found in any::<bool>()) {
        let (mut a, mut b) = duplex();
        let client = thread::spawn(move || {
            let mut d = DirectDecision::new();
            run_decision_client(&mut d, &mut b.reader, &mut b.writer)
        });
        let sensors = (0..n).map(|i| rec(90.0, i % 3 == 0)).collect();
        let mut exec = Scripted::new(sensors, found.then_some(45.0));
        let r = run_executor_session(&mut exec, &mut a.reader, &mut a.writer);
        drop(a);
        prop_assert_eq!(r, SessionReport { cycles: n as u64, end: SessionEnd::Stopped });
        prop_assert_eq!(client.join().unwrap(), SessionReport { cycles: n as u64, end: SessionEnd::PeerClosed });
    }
}
