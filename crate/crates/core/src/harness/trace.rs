use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::actions::StopReason;
use crate::geometry::{normalize_angle, Obstacle, Pose};
use crate::sensors::{LookOutcome, PerceptionRecord};

use super::scenario::Trigger;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: u32,
    pub perception: PerceptionRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look: Option<LookOutcome>,
    /// Wire form without the line terminator.
    pub command: String,
    /// Ticks consumed by the look and the action together.
    pub ticks: u32,
    pub pose_after: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_direction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub cycle: u32,
    pub trigger: Trigger,
    pub obstacle: Obstacle,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    Reached,
    CycleBudget,
    Stuck,
    ProtocolError,
    DecisionError,
    PeerClosed,
    /// Live operator asked for a restart.
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub reached: bool,
    pub cycles_used: u32,
    pub path_length_m: f64,
    pub reason: TerminalReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub final_pose: Pose,
    pub detect_loss_recoveries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        schema_version: u32,
        scenario: String,
        seed: u64,
    },
    Cycle(CycleRecord),
    Event(EventRecord),
    Terminal(TerminalRecord),
}

impl TraceRecord {
    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("trace records serialize");
        s.push('\n');
        s
    }
}

/// Destination for records as a run produces them.
pub trait TraceSink {
    fn record(&mut self, record: &TraceRecord) -> io::Result<()>;
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, record: &TraceRecord) -> io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _record: &TraceRecord) -> io::Result<()> {
        Ok(())
    }
}

/// Writes one JSON object per line.
pub struct JsonlWriter<W: Write>(pub W);

impl<W: Write> TraceSink for JsonlWriter<W> {
    fn record(&mut self, record: &TraceRecord) -> io::Result<()> {
        self.0.write_all(record.to_json_line().as_bytes())
    }
}

/// Forwards to two sinks.
pub struct Tee<'a, 'b>(pub &'a mut dyn TraceSink, pub &'b mut dyn TraceSink);

impl TraceSink for Tee<'_, '_> {
    fn record(&mut self, record: &TraceRecord) -> io::Result<()> {
        self.0.record(record)?;
        self.1.record(record)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Found,
    NotFound,
    Obstacle,
    Avoid,
    Reached,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(TraceRecord::to_json_line).collect()
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, String> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
        }
        Ok(Self { records })
    }

    pub fn cycles(&self) -> impl Iterator<Item = &CycleRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Cycle(c) => Some(c),
            _ => None,
        })
    }

    pub fn events(&self) -> impl Iterator<Item = &EventRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Event(e) => Some(e),
            _ => None,
        })
    }

    pub fn terminal(&self) -> Option<&TerminalRecord> {
        self.records.iter().find_map(|r| match r {
            TraceRecord::Terminal(t) => Some(t),
            _ => None,
        })
    }

    /// Direction reported on the first cycle, which the decision program
    /// records as its initial direction.
    pub fn initial_direction(&self) -> Option<f64> {
        self.cycles().next().map(|c| c.perception.direction)
    }

    /// Phase labels in cycle order. A cycle contributes its look result,
    /// then `Obstacle` if its perception flagged one, then `Avoid` if it
    /// commanded a search. The terminal record adds `Reached`.
    pub fn phases(&self) -> Vec<Phase> {
        let mut out = Vec::new();
        for c in self.cycles() {
            match c.look {
                Some(l) if l.found => out.push(Phase::Found),
                Some(_) => out.push(Phase::NotFound),
                None => {}
            }
            if c.perception.obstacle {
                out.push(Phase::Obstacle);
            }
            if c.command.starts_with("search_Qbo(") {
                out.push(Phase::Avoid);
            }
        }
        if self.terminal().is_some_and(|t| t.reached) {
            out.push(Phase::Reached);
        }
        out
    }

    pub fn has_phase_order(&self, wanted: &[Phase]) -> bool {
        is_subsequence(&self.phases(), wanted)
    }

    /// Commands issued in cycles whose look did not find the target.
    pub fn not_found_commands(&self) -> Vec<&str> {
        self.cycles()
            .filter(|c| c.look.is_some_and(|l| !l.found))
            .map(|c| c.command.as_str())
            .collect()
    }

    /// True when every not-found cycle steered toward the initial direction.
    pub fn not_found_commands_use_initial(&self) -> bool {
        let Some(initial) = self.initial_direction() else {
            return true;
        };
        self.not_found_commands()
            .into_iter()
            .all(|cmd| command_direction(cmd).is_some_and(|d| angle_eq(d, initial)))
    }
}

/// Angle argument of a `search_Qbo(A)` or `forward_Qbo(A)` wire command.
pub fn command_direction(command: &str) -> Option<f64> {
    let arg = command
        .strip_prefix("search_Qbo(")
        .or_else(|| command.strip_prefix("forward_Qbo("))?
        .strip_suffix(')')?;
    normalize_angle(arg.parse().ok()?).ok()
}

fn angle_eq(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d) < 1e-6
}

pub fn is_subsequence<T: PartialEq>(haystack: &[T], needle: &[T]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Number of found→not-found→found transitions in a sequence of looks.
pub fn count_recoveries(looks: impl IntoIterator<Item = bool>) -> u32 {
    let mut seen = false;
    let mut lost = false;
    let mut n = 0;
    for found in looks {
        if found {
            if lost {
                n += 1;
                lost = false;
            }
            seen = true;
        } else if seen {
            lost = true;
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(i: u32, look: Option<bool>, obstacle: bool, command: &str) -> TraceRecord {
        TraceRecord::Cycle(CycleRecord {
            cycle: i,
            perception: PerceptionRecord {
                direction: 90.0,
                x: 0.0,
                y: 0.0,
                obstacle,
            },
            look: look.map(|f| {
                if f {
                    LookOutcome::found(80.0)
                } else {
                    LookOutcome::NOT_FOUND
                }
            }),
            command: command.into(),
            ticks: 1,
            pose_after: Pose::new(0.0, 0.0, 90.0),
            stop_reason: None,
            chosen_direction: None,
        })
    }

    #[test]
    fn subsequence() {
        assert!(is_subsequence(&[1, 2, 3, 4], &[1, 3]));
        assert!(!is_subsequence(&[1, 2, 3, 4], &[3, 1]));
        assert!(is_subsequence::<i32>(&[], &[]));
    }

    #[test]
    fn recoveries() {
        assert_eq!(
            count_recoveries([false, true, false, true, true, false, false, true]),
            2
        );
        assert_eq!(count_recoveries([false, false, true]), 0);
        assert_eq!(count_recoveries([true, false]), 0);
    }

    #[test]
    fn phases_and_directions() {
        let t = Trace {
            records: vec![
                cycle(0, None, false, "none"),
                cycle(1, Some(true), false, "forward_Qbo(80.000)"),
                cycle(2, Some(false), true, "search_Qbo(90.000)"),
                cycle(3, Some(true), false, "forward_Qbo(80.000)"),
            ],
        };
        assert_eq!(
            t.phases(),
            vec![
                Phase::Found,
                Phase::NotFound,
                Phase::Obstacle,
                Phase::Avoid,
                Phase::Found
            ]
        );
        assert!(t.has_phase_order(&[Phase::Found, Phase::NotFound, Phase::Found]));
        assert!(!t.has_phase_order(&[Phase::Reached]));
        assert!(t.not_found_commands_use_initial());
        assert_eq!(command_direction("search_Qbo(270.000)"), Some(-90.0));
        assert_eq!(command_direction("none"), None);
    }

    #[test]
    fn jsonl_round_trip() {
        let t = Trace {
            records: vec![
                TraceRecord::Header {
                    schema_version: TRACE_SCHEMA_VERSION,
                    scenario: "x".into(),
                    seed: 7,
                },
                cycle(0, Some(true), true, "none"),
            ],
        };
        let text = t.to_jsonl();
        assert!(text.starts_with(r#"{"type":"header","schema_version":1,"scenario":"x","seed":7}"#));
        assert!(text.contains(r#""obstacle":1"#));
        assert_eq!(Trace::from_jsonl(text.as_bytes()).unwrap(), t);
    }
}
