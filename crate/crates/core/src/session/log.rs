//! Structured game log: one JSON object per line.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::action::Outcome;
use crate::world::{LocationId, NpcId, StateLabel};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Player,
    GameFeedback,
    Npc(NpcId),
    System,
}

impl Role {
    pub fn npc(&self) -> Option<&NpcId> {
        match self {
            Role::Npc(id) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Player => f.write_str("player"),
            Role::GameFeedback => f.write_str("game_feedback"),
            Role::System => f.write_str("system"),
            Role::Npc(id) => write!(f, "npc:{id}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown log role `{0}`")]
pub struct RoleParseError(String);

impl FromStr for Role {
    type Err = RoleParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "player" => Ok(Role::Player),
            "game_feedback" => Ok(Role::GameFeedback),
            "system" => Ok(Role::System),
            _ => match s.strip_prefix("npc:") {
                Some(id) if !id.is_empty() => Ok(Role::Npc(NpcId::new(id))),
                _ => Err(RoleParseError(s.to_string())),
            },
        }
    }
}

impl Serialize for Role {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Role {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordClass {
    Action,
    Words,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemEvent {
    Intro,
    Explosion,
    Won,
}

/// The command a player record was normalized to. `verb` may be outside the
/// supported set when normalization did not recognize it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRef {
    pub verb: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub day: u32,
    pub step_in_day: u32,
    pub role: Role,
    pub text: String,
    pub classification: RecordClass,
    pub state_label_after: StateLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandRef>,
    /// Player location once the record's step is done.
    pub location: LocationId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<SystemEvent>,
    /// Set when the text came from a fallback after a provider failure.
    #[serde(default, skip_serializing_if = "is_false")]
    pub fallback: bool,
}

impl LogRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }

    pub fn is_player(&self) -> bool {
        self.role == Role::Player
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaySegment {
    pub day: u32,
    pub records: Vec<LogRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("record seq {seq} does not follow {prev}")]
    NonMonotoneSeq { prev: u64, seq: u64 },
    #[error("record seq {seq} goes back from day {prev_day} to day {day}")]
    DayRegression { seq: u64, prev_day: u32, day: u32 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Partition a log into days. Boundaries fall exactly where the day counter
/// changes, which is at each explosion/reset.
pub fn split_days(log: &[LogRecord]) -> Result<Vec<DaySegment>, LogError> {
    let mut days: Vec<DaySegment> = Vec::new();
    let mut prev: Option<&LogRecord> = None;
    for rec in log {
        if let Some(p) = prev {
            if rec.seq <= p.seq {
                return Err(LogError::NonMonotoneSeq { prev: p.seq, seq: rec.seq });
            }
            if rec.day < p.day {
                return Err(LogError::DayRegression {
                    seq: rec.seq,
                    prev_day: p.day,
                    day: rec.day,
                });
            }
        }
        match days.last_mut() {
            Some(d) if d.day == rec.day => d.records.push(rec.clone()),
            _ => days.push(DaySegment {
                day: rec.day,
                records: vec![rec.clone()],
            }),
        }
        prev = Some(rec);
    }
    Ok(days)
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[LogRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

pub fn to_jsonl(records: &[LogRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_json_line());
        s.push('\n');
    }
    s
}

/// Parse line-delimited records; blank lines are skipped.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<LogRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line).map_err(|e| LogError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<LogRecord>, LogError> {
    read_jsonl(text.as_bytes())
}
