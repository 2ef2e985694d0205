//! Line grammar, one ASCII line per message, LF terminated, no spaces:
//!
//! ```text
//! sensor line   D,X,Y,Obj          45.000,1.250,-0.500,1
//! look reply    true,FD | false,0.000
//! command       none | looking_Qbo | search_Qbo(A) | forward_Qbo(A)
//! ```
//!
//! Angles go out in `[0, 360)` and come back normalized to `(-180, 180]`.
//! Every number carries exactly three decimals on output; input may carry
//! more.

use std::fmt;

use thiserror::Error;

use crate::actions::ActionCommand;
use crate::geometry::normalize_angle;
use crate::sensors::{LookOutcome, PerceptionRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WireMessage {
    SensorLine(PerceptionRecord),
    LookReply(LookOutcome),
    CommandLine(ActionCommand),
}

impl WireMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            WireMessage::SensorLine(_) => MessageKind::SensorLine,
            WireMessage::LookReply(_) => MessageKind::LookReply,
            WireMessage::CommandLine(_) => MessageKind::CommandLine,
        }
    }

    /// The message as the peer will see it after one encode/decode pass.
    pub fn quantized(&self) -> Result<WireMessage, ProtocolError> {
        decode(&encode(self)?, self.kind())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    SensorLine,
    LookReply,
    CommandLine,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::SensorLine => "sensor line",
            MessageKind::LookReply => "look reply",
            MessageKind::CommandLine => "command line",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("cannot encode non-finite value {0}")]
    Encode(f64),
    #[error("malformed {expected} {line:?}: {reason}")]
    Decode {
        line: String,
        expected: MessageKind,
        reason: String,
    },
    #[error("expected a {expected} but received a {found} {line:?}")]
    UnexpectedKind {
        line: String,
        expected: MessageKind,
        found: MessageKind,
    },
    #[error("out of sequence: {0}")]
    Sequence(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("decision failed: {0}")]
    Decision(String),
}

fn fixed3(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    // avoid "-0.000"
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.3}")
}

fn wire_angle(a: f64) -> Result<String, ProtocolError> {
    if !a.is_finite() {
        return Err(ProtocolError::Encode(a));
    }
    let mut r = (a.rem_euclid(360.0) * 1000.0).round() / 1000.0;
    if r >= 360.0 {
        r -= 360.0;
    }
    Ok(fixed3(r))
}

fn wire_coord(v: f64) -> Result<String, ProtocolError> {
    if !v.is_finite() {
        return Err(ProtocolError::Encode(v));
    }
    Ok(fixed3(v))
}

/// Encodes one message including its trailing LF.
pub fn encode(m: &WireMessage) -> Result<String, ProtocolError> {
    let body = match m {
        WireMessage::SensorLine(p) => format!(
            "{},{},{},{}",
            wire_angle(p.direction)?,
            wire_coord(p.x)?,
            wire_coord(p.y)?,
            u8::from(p.obstacle)
        ),
        WireMessage::LookReply(o) if o.found => format!("true,{}", wire_angle(o.bearing)?),
        WireMessage::LookReply(_) => "false,0.000".to_string(),
        WireMessage::CommandLine(c) => match c {
            ActionCommand::None => "none".to_string(),
            ActionCommand::Looking => "looking_Qbo".to_string(),
            ActionCommand::Search(a) => format!("search_Qbo({})", wire_angle(*a)?),
            ActionCommand::Forward(a) => format!("forward_Qbo({})", wire_angle(*a)?),
        },
    };
    Ok(body + "\n")
}

/// Accepts `-?digits(.digits)?`.
fn number(field: &str) -> Result<f64, String> {
    let digits = field.strip_prefix('-').unwrap_or(field);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int) || frac.is_some_and(|f| !all_digits(f)) {
        return Err(format!("`{field}` is not a decimal number"));
    }
    field.parse::<f64>().map_err(|e| format!("`{field}`: {e}"))
}

fn angle(field: &str) -> Result<f64, String> {
    normalize_angle(number(field)?).map_err(|e| e.to_string())
}

fn decode_sensor(body: &str) -> Result<WireMessage, String> {
    let fields: Vec<&str> = body.split(',').collect();
    let [d, x, y, obj] = fields.as_slice() else {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    };
    let obstacle = match *obj {
        "0" => false,
        "1" => true,
        other => return Err(format!("obstacle flag must be 0 or 1, found `{other}`")),
    };
    Ok(WireMessage::SensorLine(PerceptionRecord {
        direction: angle(d)?,
        x: number(x)?,
        y: number(y)?,
        obstacle,
    }))
}

fn decode_look(body: &str) -> Result<WireMessage, String> {
    let Some((flag, dir)) = body.split_once(',') else {
        return Err("expected `true,FD` or `false,0.000`".into());
    };
    match flag {
        "true" => Ok(WireMessage::LookReply(LookOutcome::found(angle(dir)?))),
        "false" => {
            number(dir)?;
            Ok(WireMessage::LookReply(LookOutcome::NOT_FOUND))
        }
        other => Err(format!("found flag must be true or false, found `{other}`")),
    }
}

fn decode_command(body: &str) -> Result<WireMessage, String> {
    let command = match body {
        "none" => ActionCommand::None,
        "looking_Qbo" => ActionCommand::Looking,
        _ => {
            let (name, rest) = body
                .split_once('(')
                .ok_or_else(|| format!("unknown command `{body}`"))?;
            let arg = rest
                .strip_suffix(')')
                .ok_or_else(|| "missing `)`".to_string())?;
            let a = angle(arg)?;
            match name {
                "search_Qbo" => ActionCommand::Search(a),
                "forward_Qbo" => ActionCommand::Forward(a),
                _ => return Err(format!("unknown command `{name}`")),
            }
        }
    };
    Ok(WireMessage::CommandLine(command))
}

fn decode_as(body: &str, kind: MessageKind) -> Result<WireMessage, String> {
    match kind {
        MessageKind::SensorLine => decode_sensor(body),
        MessageKind::LookReply => decode_look(body),
        MessageKind::CommandLine => decode_command(body),
    }
}

/// Decodes one line as `expected`. A trailing LF or CRLF is ignored. A
/// line that is well formed for a different kind is a sequencing error.
pub fn decode(line: &str, expected: MessageKind) -> Result<WireMessage, ProtocolError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let body = body.strip_suffix('\r').unwrap_or(body);
    decode_as(body, expected).map_err(|reason| {
        let others = [
            MessageKind::SensorLine,
            MessageKind::LookReply,
            MessageKind::CommandLine,
        ];
        match others
            .into_iter()
            .find(|k| *k != expected && decode_as(body, *k).is_ok())
        {
            Some(found) => ProtocolError::UnexpectedKind {
                line: body.to_string(),
                expected,
                found,
            },
            None => ProtocolError::Decode {
                line: body.to_string(),
                expected,
                reason,
            },
        }
    })
}
