use std::io::{self, BufReader};
use std::net::TcpStream;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::actions::{self, ActionCommand, ActionError, ActionOutcome, TickControl, TickObserver};
use crate::decision::{DecisionMaker, DecisionState, DirectDecision, BUILTIN_RULES};
use crate::geometry::{Obstacle, Point, Pose, Target, World};
use crate::logic::{parse_program, ParseError, Program};
use crate::protocol::{
    duplex, encode, run_decision_client, run_executor_session, Endpoint, ExecStatus, Executor,
    ProtocolError, SessionEnd, SessionReport, WireMessage,
};
use crate::sensors::{perceive, LookOutcome, PerceptionRecord};

use super::scenario::{check_obstacle_placement, Scenario, Trigger};
use super::trace::{
    count_recoveries, CycleRecord, EventRecord, TerminalReason, TerminalRecord, Trace, TraceRecord,
    TraceSink, TRACE_SCHEMA_VERSION,
};

/// Which decision maker drives the robot.
#[derive(Debug, Clone)]
pub enum Policy {
    /// A rule program run by the logic engine.
    Rules(Program),
    /// The decision table coded directly.
    Direct,
}

impl Default for Policy {
    fn default() -> Self {
        Policy::Rules(parse_program(BUILTIN_RULES).expect("shipped rule file parses"))
    }
}

impl Policy {
    pub fn from_rules(text: &str) -> Result<Self, ParseError> {
        Ok(Policy::Rules(parse_program(text)?))
    }

    pub fn decision_maker(&self) -> Box<dyn DecisionMaker> {
        match self {
            Policy::Rules(p) => Box::new(DecisionState::new(p.clone())),
            Policy::Direct => Box::new(DirectDecision::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// In-memory stream pair.
    Memory,
    /// Loopback TCP; port 0 picks a free port.
    Tcp(Endpoint),
    /// Listen on the endpoint and serve one external decision client.
    External(Endpoint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunMode {
    /// Decision and executor in one loop, messages still quantized as on the wire.
    InProcess,
    /// Decision client on its own thread, talking over a byte stream.
    Socket(Transport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub reached: bool,
    pub cycles_used: u32,
    pub path_length: f64,
    pub detect_loss_recoveries: u32,
    pub reason: TerminalReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub final_pose: Pose,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("writing the trace failed: {0}")]
    Trace(io::Error),
    #[error("socket setup failed: {0}")]
    Transport(io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LiveAction {
    PlaceObstacle(Obstacle),
    Reset(u64),
}

/// Operator hooks for live mode, polled at every tick boundary.
pub trait LiveControl {
    /// May block (pause, pacing). Returned actions are applied before the
    /// next tick.
    fn tick_boundary(&mut self, world: &World, cycle: u32) -> Vec<LiveAction>;
}

/// Appends `obstacle` unless it would contain the robot.
pub fn apply_event(world: &mut World, obstacle: Obstacle) -> Result<(), String> {
    check_obstacle_placement(world.robot, &obstacle)?;
    world.obstacles.push(obstacle);
    Ok(())
}

fn event_record(
    world: &mut World,
    cycle: u32,
    trigger: Trigger,
    obstacle: Obstacle,
) -> EventRecord {
    let result = apply_event(world, obstacle);
    EventRecord {
        cycle,
        trigger,
        obstacle,
        accepted: result.is_ok(),
        reason: result.err(),
    }
}

fn within_reach(position: Point, target: &Target) -> bool {
    position.distance(target.position()) <= target.reach_radius
}

struct Hook<'a, 'l> {
    target: Target,
    last: Point,
    cycle: u32,
    path_length: &'a mut f64,
    reached: &'a mut bool,
    live: Option<&'a mut (dyn LiveControl + 'l)>,
    events: &'a mut Vec<EventRecord>,
    reset: &'a mut Option<u64>,
}

impl TickObserver for Hook<'_, '_> {
    fn after_tick(&mut self, world: &mut World) -> TickControl {
        let p = world.robot_position();
        *self.path_length += p.distance(self.last);
        self.last = p;
        if within_reach(p, &self.target) {
            *self.reached = true;
            return TickControl::Halt;
        }
        if let Some(live) = self.live.as_deref_mut() {
            for action in live.tick_boundary(world, self.cycle) {
                match action {
                    LiveAction::PlaceObstacle(o) => {
                        self.events
                            .push(event_record(world, self.cycle, Trigger::Manual, o))
                    }
                    LiveAction::Reset(seed) => *self.reset = Some(seed),
                }
            }
            if self.reset.is_some() {
                return TickControl::Halt;
            }
        }
        TickControl::Continue
    }
}

struct Runner<'s, 'l> {
    scenario: &'s Scenario,
    world: World,
    sink: &'s mut dyn TraceSink,
    live: Option<&'s mut (dyn LiveControl + 'l)>,
    cycle: u32,
    path_length: f64,
    reached: bool,
    reset: Option<u64>,
    perception: Option<PerceptionRecord>,
    look: Option<LookOutcome>,
    look_ticks: u32,
    looks: Vec<bool>,
    fired: Vec<bool>,
    events: Vec<EventRecord>,
    terminal: Option<(TerminalReason, Option<String>)>,
    io_error: Option<io::Error>,
}

impl<'s, 'l> Runner<'s, 'l> {
    fn emit(&mut self, record: TraceRecord) {
        if self.io_error.is_some() {
            return;
        }
        if let Err(e) = self.sink.record(&record) {
            self.io_error = Some(e);
        }
    }

    fn flush_events(&mut self) {
        for e in std::mem::take(&mut self.events) {
            self.emit(TraceRecord::Event(e));
        }
    }

    fn end(&mut self, reason: TerminalReason, detail: Option<String>) {
        self.terminal.get_or_insert((reason, detail));
    }

    fn poll_live(&mut self) {
        let Some(live) = self.live.as_deref_mut() else {
            return;
        };
        for action in live.tick_boundary(&self.world, self.cycle) {
            match action {
                LiveAction::PlaceObstacle(o) => {
                    let e = event_record(&mut self.world, self.cycle, Trigger::Manual, o);
                    self.events.push(e);
                }
                LiveAction::Reset(seed) => self.reset = Some(seed),
            }
        }
    }

    /// Ends the run when a stop condition holds. Returns whether it did.
    fn check_stop(&mut self) -> bool {
        if self.terminal.is_some() || self.io_error.is_some() {
            return true;
        }
        if self.reset.is_some() {
            self.end(TerminalReason::Reset, None);
        } else if self.reached || within_reach(self.world.robot_position(), &self.world.target) {
            self.reached = true;
            self.end(TerminalReason::Reached, None);
        } else if self.cycle >= self.scenario.max_cycles {
            self.end(TerminalReason::CycleBudget, None);
        }
        self.terminal.is_some()
    }

    fn fire_triggers(&mut self, found: bool) {
        for (i, ev) in self.scenario.events.iter().enumerate() {
            if self.fired[i] {
                continue;
            }
            let fire = match ev.trigger {
                Trigger::AtCycle { cycle } => cycle == self.cycle,
                Trigger::OnFirstDetection => found,
                Trigger::Manual => false,
            };
            if fire {
                self.fired[i] = true;
                let obstacle = ev.action.resolve(&self.world);
                let e = event_record(&mut self.world, self.cycle, ev.trigger, obstacle);
                self.events.push(e);
            }
        }
        self.flush_events();
    }

    fn run_action(&mut self, command: ActionCommand) -> Result<actions::ActionResult, ActionError> {
        let Runner {
            scenario,
            world,
            live,
            cycle,
            path_length,
            reached,
            events,
            reset,
            ..
        } = self;
        let mut hook = Hook {
            target: world.target,
            last: world.robot_position(),
            cycle: *cycle,
            path_length,
            reached,
            live: live.as_deref_mut(),
            events,
            reset,
        };
        actions::execute(world, command, &scenario.params, &mut hook)
    }

    fn finish(mut self) -> Result<RunReport, RunError> {
        let (reason, detail) = self
            .terminal
            .take()
            .unwrap_or((TerminalReason::PeerClosed, None));
        let terminal = TerminalRecord {
            reached: self.reached,
            cycles_used: self.cycle,
            path_length_m: self.path_length,
            reason,
            detail: detail.clone(),
            final_pose: self.world.robot,
            detect_loss_recoveries: count_recoveries(self.looks.iter().copied()),
        };
        self.emit(TraceRecord::Terminal(terminal.clone()));
        if let Some(e) = self.io_error {
            return Err(RunError::Trace(e));
        }
        Ok(RunReport {
            seed: 0,
            reached: terminal.reached,
            cycles_used: terminal.cycles_used,
            path_length: terminal.path_length_m,
            detect_loss_recoveries: terminal.detect_loss_recoveries,
            reason,
            detail,
            final_pose: terminal.final_pose,
        })
    }

    /// Chooses the terminal reason when the session ended without one.
    fn settle(&mut self, exec: &SessionReport, client: &SessionReport) {
        if self.terminal.is_some() {
            return;
        }
        match (&exec.end, &client.end) {
            (_, SessionEnd::Error(ProtocolError::Decision(msg))) => {
                self.end(TerminalReason::DecisionError, Some(msg.clone()))
            }
            (SessionEnd::Error(e), _) | (_, SessionEnd::Error(e)) => {
                self.end(TerminalReason::ProtocolError, Some(e.to_string()))
            }
            _ => self.end(TerminalReason::PeerClosed, None),
        }
    }
}

impl Executor for Runner<'_, '_> {
    fn sense(&mut self) -> Option<PerceptionRecord> {
        if self.terminal.is_none() {
            self.poll_live();
            self.flush_events();
        }
        if self.check_stop() {
            return None;
        }
        let p = perceive(&self.world, &self.scenario.params.sensors);
        let p = match WireMessage::SensorLine(p).quantized() {
            Ok(WireMessage::SensorLine(q)) => q,
            _ => p,
        };
        self.perception = Some(p);
        self.look = None;
        self.look_ticks = 0;
        Some(p)
    }

    fn look(&mut self) -> LookOutcome {
        let result = self.run_action(ActionCommand::Looking);
        let (outcome, ticks) = match result {
            Ok(actions::ActionResult {
                outcome: ActionOutcome::Looked(o),
                ticks,
            }) => (o, ticks),
            _ => (LookOutcome::NOT_FOUND, 0),
        };
        let outcome = match WireMessage::LookReply(outcome).quantized() {
            Ok(WireMessage::LookReply(q)) => q,
            _ => outcome,
        };
        self.look = Some(outcome);
        self.look_ticks = ticks;
        outcome
    }

    fn execute(&mut self, command: ActionCommand) -> ExecStatus {
        if self.reset.is_some() {
            self.end(TerminalReason::Reset, None);
            self.flush_events();
            return ExecStatus::Stop;
        }
        let perception = self.perception.take().expect("execute follows sense");
        let result = self.run_action(command);
        self.flush_events();
        let wire = encode(&WireMessage::CommandLine(command))
            .map(|s| s.trim_end().to_string())
            .unwrap_or_else(|_| command.to_string());
        let mut record = CycleRecord {
            cycle: self.cycle,
            perception,
            look: self.look,
            command: wire,
            ticks: self.look_ticks,
            pose_after: self.world.robot,
            stop_reason: None,
            chosen_direction: None,
        };
        match result {
            Ok(r) => {
                record.ticks += r.ticks;
                record.stop_reason = r.stop_reason();
                if let ActionOutcome::Search {
                    chosen_direction, ..
                } = r.outcome
                {
                    record.chosen_direction = Some(chosen_direction);
                }
            }
            Err(e) => {
                if let ActionError::Stuck { ticks, .. } = e {
                    record.ticks += ticks;
                }
                record.pose_after = self.world.robot;
                self.end(TerminalReason::Stuck, Some(e.to_string()));
            }
        }
        self.emit(TraceRecord::Cycle(record));
        let found = self.look.is_some_and(|l| l.found);
        if let Some(l) = self.look {
            self.looks.push(l.found);
        }
        if self.terminal.is_none() && !self.reached && self.reset.is_none() {
            self.fire_triggers(found);
        }
        self.cycle += 1;
        if self.check_stop() {
            ExecStatus::Stop
        } else {
            ExecStatus::Continue
        }
    }
}

const SECOND_LOOK: &str = "second looking_Qbo within one cycle";

fn in_process(runner: &mut Runner<'_, '_>, decision: &mut dyn DecisionMaker) {
    while let Some(p) = runner.sense() {
        let mut looked = false;
        let result = {
            let mut look = || -> Result<LookOutcome, String> {
                if looked {
                    return Err(SECOND_LOOK.into());
                }
                looked = true;
                Ok(runner.look())
            };
            decision.step(&p, &mut look)
        };
        let command =
            result.map_err(|e| e.to_string()).and_then(|c| {
                match WireMessage::CommandLine(c).quantized() {
                    Ok(WireMessage::CommandLine(q)) => Ok(q),
                    Ok(_) => unreachable!(),
                    Err(e) => Err(e.to_string()),
                }
            });
        match command {
            Ok(c) => {
                if runner.execute(c) == ExecStatus::Stop {
                    break;
                }
            }
            Err(msg) => {
                runner.end(TerminalReason::DecisionError, Some(msg));
                break;
            }
        }
    }
}

fn over_socket(
    runner: &mut Runner<'_, '_>,
    mut decision: Box<dyn DecisionMaker>,
    transport: &Transport,
) -> Result<(), RunError> {
    let (exec, client) = match transport {
        Transport::Memory => {
            let (mut here, mut there) = duplex();
            let client = thread::spawn(move || {
                run_decision_client(decision.as_mut(), &mut there.reader, &mut there.writer)
            });
            let exec = run_executor_session(runner, &mut here.reader, &mut here.writer);
            drop(here);
            (exec, client.join().expect("decision thread panicked"))
        }
        Transport::Tcp(endpoint) => {
            let listener = endpoint.bind().map_err(RunError::Transport)?;
            let addr = listener.local_addr().map_err(RunError::Transport)?;
            let client = thread::spawn(move || -> io::Result<SessionReport> {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                let mut reader = BufReader::new(stream.try_clone()?);
                let mut writer = stream;
                Ok(run_decision_client(
                    decision.as_mut(),
                    &mut reader,
                    &mut writer,
                ))
            });
            let (stream, _) = listener.accept().map_err(RunError::Transport)?;
            stream.set_nodelay(true).map_err(RunError::Transport)?;
            let mut reader = BufReader::new(stream.try_clone().map_err(RunError::Transport)?);
            let mut writer = stream;
            let exec = run_executor_session(runner, &mut reader, &mut writer);
            let _ = writer.shutdown(std::net::Shutdown::Both);
            let client = client
                .join()
                .expect("decision thread panicked")
                .map_err(RunError::Transport)?;
            (exec, client)
        }
        Transport::External(endpoint) => {
            let listener = endpoint.bind().map_err(RunError::Transport)?;
            let (stream, _) = listener.accept().map_err(RunError::Transport)?;
            stream.set_nodelay(true).map_err(RunError::Transport)?;
            let mut reader = BufReader::new(stream.try_clone().map_err(RunError::Transport)?);
            let mut writer = stream;
            let exec = run_executor_session(runner, &mut reader, &mut writer);
            let _ = writer.shutdown(std::net::Shutdown::Both);
            let client = SessionReport {
                cycles: exec.cycles,
                end: SessionEnd::PeerClosed,
            };
            (exec, client)
        }
    };
    runner.settle(&exec, &client);
    Ok(())
}

/// Runs one scenario to its terminal record, streaming records into `sink`.
pub fn run_with(
    scenario: &Scenario,
    seed: u64,
    mode: &RunMode,
    policy: &Policy,
    sink: &mut dyn TraceSink,
    live: Option<&mut dyn LiveControl>,
) -> Result<RunReport, RunError> {
    let mut runner = Runner {
        scenario,
        world: scenario.world(seed),
        sink,
        live,
        cycle: 0,
        path_length: 0.0,
        reached: false,
        reset: None,
        perception: None,
        look: None,
        look_ticks: 0,
        looks: Vec::new(),
        fired: vec![false; scenario.events.len()],
        events: Vec::new(),
        terminal: None,
        io_error: None,
    };
    runner.emit(TraceRecord::Header {
        schema_version: TRACE_SCHEMA_VERSION,
        scenario: scenario.name.clone(),
        seed,
    });
    let decision = policy.decision_maker();
    match mode {
        RunMode::InProcess => {
            let mut decision = decision;
            in_process(&mut runner, decision.as_mut());
        }
        RunMode::Socket(t) => over_socket(&mut runner, decision, t)?,
    }
    let mut report = runner.finish()?;
    report.seed = seed;
    Ok(report)
}

/// Runs one scenario and keeps the whole trace in memory.
pub fn run(
    scenario: &Scenario,
    seed: u64,
    mode: &RunMode,
    policy: &Policy,
) -> Result<(RunReport, Trace), RunError> {
    let mut records = Vec::new();
    let report = run_with(scenario, seed, mode, policy, &mut records, None)?;
    Ok((report, Trace { records }))
}
