//! Play sessions: routes each command through the gateway to the action
//! engine or an NPC, counts steps, fires the explosion at the step limit and
//! keeps the append-only game log.

mod log;
mod replay;
mod store;

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use log::{
    parse_jsonl, read_jsonl, split_days, to_jsonl, write_jsonl, CommandRef, DaySegment, LogError, LogRecord, RecordClass,
    Role, RoleParseError, SystemEvent,
};
pub use replay::{check_coherence, CoherenceError};
pub use store::{SessionStore, StoreError};

use crate::action::{describe_location, ActionEngine, FailureMessages, VerbObjectCommand};
use crate::gateway::{Gateway, InputKind, Normalized, Turn};
use crate::npc::{self, ConversationTurn, NpcEvent, Satisfied, Speaker};
use crate::world::{NpcId, WorldSpec, WorldState};

/// Text of the system record emitted on a win.
pub const WON_TEXT: &str = "The village is safe. You won!";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    Running,
    Won,
    TimeUp,
}

/// Who is playing. Motivation profiles are carried as metadata only.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerMetadata {
    pub player_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motivation_profiles: Vec<String>,
}

impl PlayerMetadata {
    pub fn new(player_id: impl Into<String>) -> Self {
        Self {
            player_id: player_id.into(),
            motivation_profiles: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub id: String,
    pub player: PlayerMetadata,
    pub world: WorldState,
    pub history: crate::gateway::HistoryWindow,
    pub status: SessionStatus,
    /// Unix seconds.
    pub created: u64,
    pub log: Vec<LogRecord>,
}

impl Session {
    pub fn next_seq(&self) -> u64 {
        self.log.last().map_or(1, |r| r.seq + 1)
    }

    pub fn day(&self) -> u32 {
        self.world.day
    }

    pub fn step_in_day(&self) -> u32 {
        self.world.step_in_day
    }

    /// End a running session without a win (wall-clock limits and the like).
    pub fn time_up(&mut self) {
        if self.status == SessionStatus::Running {
            self.status = SessionStatus::TimeUp;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("empty input")]
    EmptyInput,
    #[error("session is over ({0:?})")]
    SessionOver(SessionStatus),
}

/// Shared, immutable parts of play: the world, the gateway and the failure
/// table. One runtime serves any number of sessions.
#[derive(Clone)]
pub struct GameRuntime {
    spec: Arc<WorldSpec>,
    gateway: Gateway,
    messages: Arc<FailureMessages>,
}

struct Pending {
    role: Role,
    text: String,
    fallback: bool,
    event: Option<SystemEvent>,
}

impl Pending {
    fn new(role: Role, text: String, fallback: bool) -> Self {
        Self {
            role,
            text,
            fallback,
            event: None,
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl GameRuntime {
    pub fn new(spec: Arc<WorldSpec>, gateway: Gateway) -> Self {
        Self {
            spec,
            gateway,
            messages: Arc::new(FailureMessages::default()),
        }
    }

    pub fn with_messages(mut self, messages: FailureMessages) -> Self {
        self.messages = Arc::new(messages);
        self
    }

    pub fn spec(&self) -> &Arc<WorldSpec> {
        &self.spec
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    fn intro_text(&self, state: &WorldState) -> String {
        let spec = &*self.spec;
        let room = spec
            .location(&state.current_location)
            .map(|l| describe_location(spec, state, l))
            .unwrap_or_default();
        format!("{} {}", spec.intro_text, room)
    }

    fn system_record(&self, seq: u64, state: &WorldState, text: String, event: SystemEvent) -> LogRecord {
        LogRecord {
            seq,
            day: state.day,
            step_in_day: state.step_in_day,
            role: Role::System,
            text,
            classification: RecordClass::None,
            state_label_after: state.label(&self.spec),
            command: None,
            location: state.current_location.clone(),
            outcome: None,
            event: Some(event),
            fallback: false,
        }
    }

    pub fn start_session(&self, player: PlayerMetadata) -> Session {
        let world = WorldState::fresh(&self.spec);
        let intro = self.system_record(1, &world, self.intro_text(&world), SystemEvent::Intro);
        let mut history = crate::gateway::HistoryWindow::default();
        history.push(
            Turn {
                speaker: Role::System.to_string(),
                text: intro.text.clone(),
                step: 0,
                day: 1,
            },
            self.gateway.estimator(),
        );
        Session {
            id: uuid::Uuid::new_v4().to_string(),
            player,
            world,
            history,
            status: SessionStatus::Running,
            created: unix_now(),
            log: vec![intro],
        }
    }

    fn voice_npc(
        &self,
        session: &mut Session,
        npc: &NpcId,
        event: NpcEvent,
        utterance: &str,
    ) -> Option<(String, bool)> {
        let ctx = npc::build_npc_context(npc, &session.world, &self.spec, &session.history, event)?;
        let answer = self.gateway.npc_respond(&ctx, utterance, &session.history);
        npc::record_npc_line(&mut session.world, npc, &answer.value);
        Some((answer.value, answer.fallback))
    }

    /// Start a session and feed it `commands`, skipping blank lines and
    /// stopping once the session is over.
    pub fn play_script<I, S>(&self, player: PlayerMetadata, commands: I) -> Session
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut session = self.start_session(player);
        for cmd in commands {
            if session.status != SessionStatus::Running {
                break;
            }
            if cmd.as_ref().trim().is_empty() {
                continue;
            }
            self.step(&mut session, cmd.as_ref()).expect("non-empty command on a running session");
        }
        session
    }

    /// Run one player command and return the records it produced, already
    /// appended to `session.log`.
    pub fn step(&self, session: &mut Session, raw: &str) -> Result<Vec<LogRecord>, StepError> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(StepError::EmptyInput);
        }
        if session.status != SessionStatus::Running {
            return Err(StepError::SessionOver(session.status));
        }
        let spec = Arc::clone(&self.spec);
        let spec = &*spec;
        let here = session.world.current_location.clone();
        let npc_here = npc::npc_present(&here, &session.world, spec).map(|n| n.id.clone());
        let class = self
            .gateway
            .classify(raw, npc_here.is_some())
            .map_err(|_| StepError::EmptyInput)?;

        session.world.step_in_day += 1;
        let mut pending = Vec::new();
        let mut command = None;
        let mut outcome = None;
        let mut player_fallback = class.fallback;
        let classification = match class.value.kind {
            InputKind::Action => RecordClass::Action,
            InputKind::Words => RecordClass::Words,
        };

        match class.value.kind {
            InputKind::Action => {
                let engine = ActionEngine::new(spec, &self.messages);
                let norm = self.gateway.normalize(raw, spec);
                player_fallback |= norm.fallback;
                let (result, next) = match &norm.value {
                    Normalized::Command(cmd) => {
                        command = Some(CommandRef {
                            verb: cmd.verb.to_string(),
                            object: cmd.object.clone(),
                        });
                        let cmd = VerbObjectCommand {
                            raw: raw.to_string(),
                            ..cmd.clone()
                        };
                        engine.execute(&cmd, &session.world)
                    }
                    Normalized::Unrecognized { verb, object, .. } => {
                        command = Some(CommandRef {
                            verb: verb.clone(),
                            object: object.clone(),
                        });
                        (engine.unknown_verb(verb), session.world.clone())
                    }
                };
                outcome = Some(result.outcome);
                if result.is_success() {
                    session.world = next;
                    pending.push(Pending::new(Role::GameFeedback, result.message.clone(), false));
                    if let Some(moved) = &result.delta.moved_to {
                        if let Some(npc) = npc::npc_present(moved, &session.world, spec).map(|n| n.id.clone()) {
                            if let Some((text, fb)) = self.voice_npc(session, &npc, NpcEvent::Arrival, "") {
                                pending.push(Pending::new(Role::Npc(npc), text, fb));
                            }
                        }
                    }
                    if result.delta.won {
                        session.status = SessionStatus::Won;
                        pending.push(Pending {
                            event: Some(SystemEvent::Won),
                            ..Pending::new(Role::System, WON_TEXT.to_string(), false)
                        });
                    }
                } else {
                    let witness = npc_here.as_ref().and_then(|id| {
                        npc::build_npc_context(
                            id,
                            &session.world,
                            spec,
                            &session.history,
                            NpcEvent::FailedAction {
                                attempt: raw.to_string(),
                            },
                        )
                    });
                    let answer = self
                        .gateway
                        .rewrite_failure(raw, &result, witness.as_ref(), &session.history);
                    match witness {
                        Some(ctx) => {
                            npc::record_npc_line(&mut session.world, &ctx.npc, &answer.value);
                            pending.push(Pending::new(Role::Npc(ctx.npc), answer.value, answer.fallback));
                        }
                        None => pending.push(Pending::new(Role::GameFeedback, answer.value, answer.fallback)),
                    }
                }
            }
            InputKind::Words => match &npc_here {
                Some(npc) => {
                    let (satisfied, judge_failed) =
                        match npc::interact(&mut session.world, spec, npc, raw, &self.gateway) {
                            Ok(i) => {
                                let goal = i
                                    .satisfied_goal
                                    .and_then(|g| spec.npc(npc).and_then(|n| n.goals.get(g)));
                                let satisfied = goal.map(|g| Satisfied {
                                    reply: g.reply_met.clone(),
                                    clue: i.effects.clue.clone(),
                                });
                                (satisfied, false)
                            }
                            Err(e) => {
                                ::log::warn!("judge failed for {npc}: {e}; goal not advanced");
                                if let Some(rt) = session.world.npcs.get_mut(npc) {
                                    rt.window.push(ConversationTurn {
                                        speaker: Speaker::Player,
                                        text: raw.to_string(),
                                    });
                                }
                                (None, true)
                            }
                        };
                    let name = spec.npc(npc).map(|n| n.name.clone()).unwrap_or_default();
                    let (text, fb) = self
                        .voice_npc(session, npc, NpcEvent::Utterance { satisfied }, raw)
                        .unwrap_or_else(|| (crate::gateway::stall_line(&name), true));
                    pending.push(Pending::new(Role::Npc(npc.clone()), text, fb || judge_failed));
                }
                None => {
                    let answer = self.gateway.game_feedback(raw, spec, &session.world, &session.history);
                    pending.push(Pending::new(Role::GameFeedback, answer.value, answer.fallback));
                }
            },
        }

        let label = session.world.label(spec);
        let mut seq = session.next_seq();
        let mut records = Vec::with_capacity(pending.len() + 3);
        let mut base = LogRecord {
            seq,
            day: session.world.day,
            step_in_day: session.world.step_in_day,
            role: Role::Player,
            text: raw.to_string(),
            classification,
            state_label_after: label,
            command,
            location: session.world.current_location.clone(),
            outcome,
            event: None,
            fallback: player_fallback,
        };
        records.push(base.clone());
        base.classification = RecordClass::None;
        base.command = None;
        base.outcome = None;
        for p in pending {
            seq += 1;
            records.push(LogRecord {
                seq,
                role: p.role,
                text: p.text,
                event: p.event,
                fallback: p.fallback,
                ..base.clone()
            });
        }

        if session.status == SessionStatus::Running && session.world.step_in_day >= spec.bomb.step_limit {
            seq += 1;
            records.push(self.system_record(seq, &session.world, spec.bomb.explosion_text.clone(), SystemEvent::Explosion));
            session.world = session.world.reset(spec);
            seq += 1;
            let intro = self.intro_text(&session.world);
            records.push(self.system_record(seq, &session.world, intro, SystemEvent::Intro));
        }

        for r in &records {
            session.history.push(
                Turn {
                    speaker: r.role.to_string(),
                    text: r.text.clone(),
                    step: r.step_in_day,
                    day: r.day,
                },
                self.gateway.estimator(),
            );
        }
        session.history = self.gateway.maybe_summarize(&session.history).value;
        session.log.extend(records.iter().cloned());
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::dejaboom;

    fn runtime() -> GameRuntime {
        GameRuntime::new(Arc::new(dejaboom()), Gateway::rule_based())
    }

    #[test]
    fn start_emits_intro_and_fresh_state() {
        let rt = runtime();
        let a = rt.start_session(PlayerMetadata::new("p1"));
        let b = rt.start_session(PlayerMetadata::new("p1"));
        assert_ne!(a.id, b.id);
        assert_eq!(a.log.len(), 1);
        assert!(a.log[0].text.contains("deja vu"));
        assert_eq!(a.log[0].event, Some(SystemEvent::Intro));
        assert_eq!(a.world, WorldState::fresh(rt.spec()));
    }

    #[test]
    fn take_bucket_is_step_one() {
        let rt = runtime();
        let mut s = rt.start_session(PlayerMetadata::new("p1"));
        let recs = rt.step(&mut s, "take water bucket").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].role, Role::Player);
        assert_eq!(recs[0].step_in_day, 1);
        assert_eq!(recs[1].role, Role::GameFeedback);
        assert_eq!(recs[1].text, "You picked up the water bucket.");
        assert_eq!(recs[1].state_label_after.to_string(), "000000010000");
    }

    #[test]
    fn empty_input_consumes_no_step() {
        let rt = runtime();
        let mut s = rt.start_session(PlayerMetadata::new("p1"));
        assert_eq!(rt.step(&mut s, "   "), Err(StepError::EmptyInput));
        assert_eq!(s.world.step_in_day, 0);
        assert_eq!(s.log.len(), 1);
    }

    #[test]
    fn words_to_an_npc_get_an_npc_reply() {
        let rt = runtime();
        let mut s = rt.start_session(PlayerMetadata::new("p1"));
        rt.step(&mut s, "go west").unwrap();
        let recs = rt.step(&mut s, "What's your dogs name?").unwrap();
        assert_eq!(recs[0].classification, RecordClass::Words);
        assert_eq!(recs[1].role, Role::Npc(NpcId::new("mrs_thompson")));
        assert!(recs[1].text.contains("Daisy"));
    }

    #[test]
    fn step_limit_explodes_and_resets() {
        let rt = runtime();
        let mut s = rt.start_session(PlayerMetadata::new("p1"));
        rt.step(&mut s, "take bucket").unwrap();
        for _ in 0..28 {
            rt.step(&mut s, "wait").unwrap();
        }
        let last = rt.step(&mut s, "wait").unwrap();
        let events: Vec<_> = last.iter().filter_map(|r| r.event).collect();
        assert_eq!(events, vec![SystemEvent::Explosion, SystemEvent::Intro]);
        assert_eq!(s.world.day, 2);
        assert_eq!(s.world.step_in_day, 0);
        let mut fresh = WorldState::fresh(rt.spec());
        fresh.day = 2;
        assert_eq!(s.world, fresh);
        assert_eq!(split_days(&s.log).unwrap().len(), 2);
    }
}
