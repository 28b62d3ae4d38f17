//! Day segments to strategy summaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::action::{Outcome, Verb};
use crate::gateway::{Provider, ProviderError};
use crate::npc::{contains_phrase, normalize_words};
use crate::session::{DaySegment, LogRecord, RecordClass, Role, SystemEvent};
use crate::world::{LocationId, NpcId, StateLabel, WorldSpec};

use super::StrategySpan;

/// A summary rule keyed on what the player said. `any` lists keyword sets;
/// a set matches when every keyword appears in one player line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhrasePattern {
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npc: Option<NpcId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationId>,
    pub any: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhraseTable {
    pub max_words: usize,
    pub patterns: Vec<PhrasePattern>,
    pub verbs: BTreeMap<Verb, String>,
    pub talk: String,
    pub approach: String,
    pub arrive: String,
    pub attempt: String,
}

/// A distilled strategy with the state label it ends on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub summary: String,
    pub state_label: StateLabel,
    pub day: u32,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistillError {
    #[error("day segment is empty")]
    EmptySegment,
    #[error("distiller failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("distiller returned an unusable span: {0}")]
    BadSpan(String),
}

struct Step<'a> {
    player: &'a LogRecord,
    replies: Vec<&'a LogRecord>,
    transit: bool,
    talk: bool,
    milestone: bool,
}

impl Step<'_> {
    fn location(&self) -> &LocationId {
        &self.player.location
    }

    fn last_seq(&self) -> u64 {
        self.replies.last().map_or(self.player.seq, |r| r.seq)
    }

    fn npc(&self) -> Option<&NpcId> {
        self.replies.iter().find_map(|r| r.role.npc())
    }

    fn verb(&self) -> Option<Verb> {
        self.player.command.as_ref().and_then(|c| c.verb.parse().ok())
    }

    fn succeeded(&self) -> bool {
        self.player.outcome == Some(Outcome::Success)
    }
}

struct Segment<'a> {
    steps: Vec<Step<'a>>,
    talk: Option<bool>,
    milestone: bool,
}

impl Segment<'_> {
    fn location(&self) -> &LocationId {
        self.steps.last().expect("segments are non-empty").location()
    }

    fn pure_transit(&self) -> bool {
        self.steps.iter().all(|s| s.transit)
    }
}

fn steps(day: &[LogRecord]) -> Vec<Step<'_>> {
    let mut out: Vec<Step> = Vec::new();
    let mut prev_label: Option<&StateLabel> = None;
    for rec in day {
        if matches!(rec.event, Some(SystemEvent::Intro | SystemEvent::Explosion)) {
            if out.is_empty() {
                prev_label = Some(&rec.state_label_after);
            }
            continue;
        }
        if rec.is_player() {
            let gained = match prev_label {
                Some(p) => rec.state_label_after.count_ones() > p.count_ones(),
                None => rec.state_label_after.count_ones() > 0,
            };
            prev_label = Some(&rec.state_label_after);
            let transit = rec.command.as_ref().is_some_and(|c| c.verb == Verb::Go.as_str())
                && rec.outcome == Some(Outcome::Success);
            out.push(Step {
                player: rec,
                replies: Vec::new(),
                transit,
                talk: false,
                milestone: gained,
            });
        } else if let Some(step) = out.last_mut() {
            if rec.event == Some(SystemEvent::Won) {
                step.milestone = true;
            }
            step.replies.push(rec);
        }
    }
    for step in &mut out {
        let answered_by_npc = step.npc().is_some();
        step.talk = answered_by_npc
            && match step.player.classification {
                RecordClass::Words => true,
                RecordClass::Action => step.player.outcome == Some(Outcome::Failure),
                RecordClass::None => false,
            };
    }
    out
}

fn segments(steps: Vec<Step<'_>>) -> Vec<Segment<'_>> {
    let mut out: Vec<Segment> = Vec::new();
    for step in steps {
        let start_new = match out.last() {
            None => true,
            Some(seg) => {
                seg.location() != step.location()
                    || (!step.transit && seg.talk.is_some_and(|t| t != step.talk))
                    || (step.milestone && seg.milestone)
            }
        };
        if start_new {
            out.push(Segment {
                steps: Vec::new(),
                talk: None,
                milestone: false,
            });
        }
        let seg = out.last_mut().expect("just pushed");
        if !step.transit && seg.talk.is_none() {
            seg.talk = Some(step.talk);
        }
        seg.milestone |= step.milestone;
        seg.steps.push(step);
    }
    // fold pure-transit segments into the segment that follows
    let mut folded: Vec<Segment> = Vec::new();
    let mut carry: Vec<Step> = Vec::new();
    let count = out.len();
    for (i, mut seg) in out.into_iter().enumerate() {
        if seg.pure_transit() && i + 1 < count {
            carry.append(&mut seg.steps);
            continue;
        }
        if !carry.is_empty() {
            carry.append(&mut seg.steps);
            seg.steps = std::mem::take(&mut carry);
        }
        folded.push(seg);
    }
    folded
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in slots {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn cap_words(s: &str, max: usize) -> String {
    s.split_whitespace().take(max).collect::<Vec<_>>().join(" ")
}

fn location_name(world: &WorldSpec, id: &LocationId) -> String {
    world.location(id).map_or_else(|| id.to_string(), |l| l.name.clone())
}

fn npc_name(world: &WorldSpec, id: &NpcId) -> String {
    world.npc(id).map_or_else(|| id.to_string(), |n| n.name.clone())
}

fn verb_summary(step: &Step, world: &WorldSpec, table: &PhraseTable) -> Option<String> {
    let verb = step.verb()?;
    let template = table.verbs.get(&verb)?;
    let location = location_name(world, step.location());
    let object = step
        .player
        .command
        .as_ref()
        .and_then(|c| c.object.as_deref())
        .map(|o| world.find_object(o).map_or_else(|| o.to_string(), |obj| obj.name.clone()))
        .unwrap_or_else(|| location.clone());
    Some(fill(template, &[("object", &object), ("location", &location)]))
}

fn summarize(seg: &Segment, world: &WorldSpec, table: &PhraseTable) -> String {
    // NPCs met in passing while walking through do not count
    let npcs: BTreeSet<&NpcId> = seg
        .steps
        .iter()
        .filter(|s| !s.transit)
        .flat_map(|s| s.replies.iter().filter_map(|r| r.role.npc()))
        .collect();
    let location = seg.location();
    let said: Vec<String> = seg.steps.iter().map(|s| normalize_words(&s.player.text)).collect();
    let pattern = table.patterns.iter().find(|p| {
        p.npc.as_ref().is_none_or(|n| npcs.contains(n))
            && p.location.as_ref().is_none_or(|l| l == location)
            && p
                .any
                .iter()
                .any(|set| said.iter().any(|line| set.iter().all(|k| contains_phrase(line, k))))
    });
    if let Some(p) = pattern {
        return p.summary.clone();
    }
    let acted = |s: &&Step| {
        s.player.classification == RecordClass::Action && s.succeeded() && s.verb().is_some_and(|v| v != Verb::Go)
    };
    if let Some(s) = seg.steps.iter().filter(|s| s.milestone).find(acted) {
        if let Some(text) = verb_summary(s, world, table) {
            return text;
        }
    }
    if let Some(s) = seg.steps.iter().find(acted) {
        if let Some(text) = verb_summary(s, world, table) {
            return text;
        }
    }
    if let Some(npc) = seg.steps.iter().filter(|s| s.talk).find_map(|s| s.npc()) {
        return fill(&table.talk, &[("npc", &npc_name(world, npc))]);
    }
    let place = location_name(world, location);
    if seg.pure_transit() {
        let last = seg.steps.last().expect("segments are non-empty");
        return match last.npc() {
            Some(npc) => fill(&table.approach, &[("npc", &npc_name(world, npc)), ("location", &place)]),
            None => fill(&table.arrive, &[("location", &place)]),
        };
    }
    let raw = seg
        .steps
        .iter()
        .find(|s| !s.transit)
        .map_or("", |s| s.player.text.as_str());
    let raw = raw.trim_end_matches(['.', '!', '?']);
    let mut chars = raw.chars();
    let raw = match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    };
    fill(&table.attempt, &[("raw", &raw)])
}

/// Deterministic distiller used by the rule-based provider.
pub fn rule_distill(day: &[LogRecord], world: &WorldSpec, table: &PhraseTable) -> Vec<StrategySpan> {
    segments(steps(day))
        .iter()
        .map(|seg| StrategySpan {
            summary: cap_words(&summarize(seg, world, table), table.max_words),
            last_seq: seg.steps.last().expect("segments are non-empty").last_seq(),
        })
        .collect()
}

/// Maximum words in a strategy summary.
pub const MAX_SUMMARY_WORDS: usize = 15;

/// Distill one day with `provider`, retrying once on a transient error.
/// Days with no player commands yield no strategies.
pub fn distill_day(
    segment: &DaySegment,
    provider: &dyn Provider,
    world: &WorldSpec,
) -> Result<Vec<Strategy>, DistillError> {
    if segment.records.is_empty() {
        return Err(DistillError::EmptySegment);
    }
    if !segment.records.iter().any(|r| r.role == Role::Player) {
        return Ok(Vec::new());
    }
    let spans = match provider.distill(&segment.records, world) {
        Err(e) if e.is_retryable() => provider.distill(&segment.records, world)?,
        other => other?,
    };
    let mut out = Vec::with_capacity(spans.len());
    let mut prev = 0;
    for span in spans {
        let summary = cap_words(&span.summary, MAX_SUMMARY_WORDS);
        if summary.is_empty() {
            return Err(DistillError::BadSpan(format!("empty summary ending at {}", span.last_seq)));
        }
        if span.last_seq <= prev {
            return Err(DistillError::BadSpan(format!("seq {} is out of order", span.last_seq)));
        }
        let rec = segment
            .records
            .iter()
            .find(|r| r.seq == span.last_seq)
            .ok_or_else(|| DistillError::BadSpan(format!("seq {} is not in day {}", span.last_seq, segment.day)))?;
        prev = span.last_seq;
        out.push(Strategy {
            summary,
            state_label: rec.state_label_after.clone(),
            day: segment.day,
            last_seq: span.last_seq,
        });
    }
    Ok(out)
}
