use std::io::{BufRead, Write};

use crate::actions::ActionCommand;
use crate::decision::DecisionMaker;
use crate::sensors::{LookOutcome, PerceptionRecord};

use super::wire::{decode, encode, MessageKind, ProtocolError, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStatus {
    Continue,
    Stop,
}

/// The robot side of a session.
pub trait Executor {
    /// Sensor tuple opening the next cycle, or `None` to end the session.
    fn sense(&mut self) -> Option<PerceptionRecord>;
    fn look(&mut self) -> LookOutcome;
    fn execute(&mut self, command: ActionCommand) -> ExecStatus;
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEnd {
    /// The other side closed its stream.
    PeerClosed,
    /// This side decided to stop.
    Stopped,
    Error(ProtocolError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    /// Commands executed (executor) or sent (decision side).
    pub cycles: u64,
    pub end: SessionEnd,
}

fn io_err(e: std::io::Error) -> ProtocolError {
    ProtocolError::Io(e.to_string())
}

pub fn write_message<W: Write>(w: &mut W, m: &WireMessage) -> Result<(), ProtocolError> {
    w.write_all(encode(m)?.as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads one line and decodes it; `Ok(None)` on end of stream.
pub fn read_message<R: BufRead>(
    r: &mut R,
    expected: MessageKind,
) -> Result<Option<WireMessage>, ProtocolError> {
    let mut line = String::new();
    match r.read_line(&mut line) {
        Ok(0) => Ok(None),
        Ok(_) => decode(&line, expected).map(Some),
        Err(e) => Err(io_err(e)),
    }
}

/// Serves one decision client until either side stops. At most one
/// `looking_Qbo` is accepted per cycle.
pub fn run_executor_session<E, R, W>(exec: &mut E, reader: &mut R, writer: &mut W) -> SessionReport
where
    E: Executor + ?Sized,
    R: BufRead,
    W: Write,
{
    let mut cycles = 0;
    let end = loop {
        let Some(p) = exec.sense() else {
            break SessionEnd::Stopped;
        };
        if let Err(e) = write_message(writer, &WireMessage::SensorLine(p)) {
            break SessionEnd::Error(e);
        }
        match executor_cycle(exec, reader, writer) {
            Ok(Some(status)) => {
                cycles += 1;
                if status == ExecStatus::Stop {
                    break SessionEnd::Stopped;
                }
            }
            Ok(None) => break SessionEnd::PeerClosed,
            Err(e) => break SessionEnd::Error(e),
        }
    };
    SessionReport { cycles, end }
}

fn executor_cycle<E, R, W>(
    exec: &mut E,
    reader: &mut R,
    writer: &mut W,
) -> Result<Option<ExecStatus>, ProtocolError>
where
    E: Executor + ?Sized,
    R: BufRead,
    W: Write,
{
    let mut looked = false;
    loop {
        let Some(WireMessage::CommandLine(cmd)) = read_message(reader, MessageKind::CommandLine)?
        else {
            return Ok(None);
        };
        if cmd != ActionCommand::Looking {
            return Ok(Some(exec.execute(cmd)));
        }
        if looked {
            return Err(ProtocolError::Sequence(
                "second looking_Qbo within one cycle".into(),
            ));
        }
        looked = true;
        let outcome = exec.look();
        write_message(writer, &WireMessage::LookReply(outcome))?;
    }
}

/// Runs the decision side: one decision step per received sensor line.
pub fn run_decision_client<D, R, W>(
    decision: &mut D,
    reader: &mut R,
    writer: &mut W,
) -> SessionReport
where
    D: DecisionMaker + ?Sized,
    R: BufRead,
    W: Write,
{
    let mut cycles = 0;
    let end = loop {
        let p = match read_message(reader, MessageKind::SensorLine) {
            Ok(Some(WireMessage::SensorLine(p))) => p,
            Ok(_) => break SessionEnd::PeerClosed,
            Err(e) => break SessionEnd::Error(e),
        };
        let mut look = || -> Result<LookOutcome, String> {
            write_message(writer, &WireMessage::CommandLine(ActionCommand::Looking))
                .map_err(|e| e.to_string())?;
            match read_message(reader, MessageKind::LookReply) {
                Ok(Some(WireMessage::LookReply(o))) => Ok(o),
                Ok(_) => Err("peer closed before the look reply".into()),
                Err(e) => Err(e.to_string()),
            }
        };
        let cmd = match decision.step(&p, &mut look) {
            Ok(c) => c,
            Err(e) => break SessionEnd::Error(ProtocolError::Decision(e.to_string())),
        };
        if let Err(e) = write_message(writer, &WireMessage::CommandLine(cmd)) {
            break SessionEnd::Error(e);
        }
        cycles += 1;
    };
    SessionReport { cycles, end }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::DirectDecision;
    use crate::protocol::duplex;
    use std::io::BufReader;

    struct Scripted {
        sensors: Vec<PerceptionRecord>,
        looks: u32,
        executed: Vec<ActionCommand>,
    }

    impl Executor for Scripted {
        fn sense(&mut self) -> Option<PerceptionRecord> {
            if self.sensors.is_empty() {
                None
            } else {
                Some(self.sensors.remove(0))
            }
        }
        fn look(&mut self) -> LookOutcome {
            self.looks += 1;
            LookOutcome::found(10.0)
        }
        fn execute(&mut self, command: ActionCommand) -> ExecStatus {
            self.executed.push(command);
            ExecStatus::Continue
        }
    }

    fn rec(d: f64, obstacle: bool) -> PerceptionRecord {
        PerceptionRecord {
            direction: d,
            x: 0.0,
            y: 0.0,
            obstacle,
        }
    }

    #[test]
    fn executor_and_client_over_memory() {
        let (mut a, mut b) = duplex();
        let client = std::thread::spawn(move || {
            let mut d = DirectDecision::new();
            run_decision_client(&mut d, &mut b.reader, &mut b.writer)
        });
        let mut exec = Scripted {
            sensors: vec![rec(90.0, false), rec(90.0, false), rec(90.0, true)],
            looks: 0,
            executed: vec![],
        };
        let r = run_executor_session(&mut exec, &mut a.reader, &mut a.writer);
        assert_eq!(
            r,
            SessionReport {
                cycles: 3,
                end: SessionEnd::Stopped
            }
        );
        drop(a);
        let c = client.join().unwrap();
        assert_eq!(
            c,
            SessionReport {
                cycles: 3,
                end: SessionEnd::PeerClosed
            }
        );
        assert_eq!(exec.looks, 2);
        assert_eq!(
            exec.executed,
            vec![
                ActionCommand::None,
                ActionCommand::Forward(10.0),
                ActionCommand::Search(10.0)
            ]
        );
    }

    #[test]
    fn empty_stream_ends_client_cleanly() {
        let mut d = DirectDecision::new();
        let mut out = Vec::new();
        let r = run_decision_client(&mut d, &mut BufReader::new(&b""[..]), &mut out);
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
    fn executor_rejects_double_look() {
        let mut exec = Scripted {
            sensors: vec![rec(0.0, false)],
            looks: 0,
            executed: vec![],
        };
        let mut input = BufReader::new(&b"looking_Qbo\nlooking_Qbo\n"[..]);
        let mut out = Vec::new();
        let r = run_executor_session(&mut exec, &mut input, &mut out);
        assert!(matches!(
            r.end,
            SessionEnd::Error(ProtocolError::Sequence(_))
        ));
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "0.000,0.000,0.000,0\ntrue,10.000\n"
        );
    }

    #[test]
    fn malformed_command_names_the_line() {
        let mut exec = Scripted {
            sensors: vec![rec(0.0, false)],
            looks: 0,
            executed: vec![],
        };
        let mut input = BufReader::new(&b"fly_Qbo(3)\n"[..]);
        let r = run_executor_session(&mut exec, &mut input, &mut Vec::new());
        match r.end {
            SessionEnd::Error(ProtocolError::Decode { line, .. }) => assert_eq!(line, "fly_Qbo(3)"),
            other => panic!("{other:?}"),
        }
    }
}
