//! Rebuild world state from a log and check every recorded label against it.

use crate::action::{ActionEngine, FailureMessages, Outcome, Verb, VerbObjectCommand};
use crate::npc::{self, KeywordJudge};
use crate::world::{StateLabel, WorldSpec, WorldState};

use super::{LogRecord, RecordClass, Role, SystemEvent};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoherenceError {
    #[error("record {seq}: logged label {logged} but replay gives {replayed}")]
    LabelMismatch {
        seq: u64,
        logged: StateLabel,
        replayed: StateLabel,
    },
    #[error("record {seq}: logged outcome {logged:?} but replay gives {replayed:?}")]
    OutcomeMismatch {
        seq: u64,
        logged: Outcome,
        replayed: Outcome,
    },
}

/// Replay `log` from a fresh world with the keyword judge. Logs produced by
/// the rule-based provider always pass; a model judge may have accepted
/// utterances the keyword sets reject, and those show up as mismatches.
pub fn check_coherence(spec: &WorldSpec, log: &[LogRecord]) -> Result<(), CoherenceError> {
    let messages = FailureMessages::default();
    let engine = ActionEngine::new(spec, &messages);
    let mut state = WorldState::fresh(spec);
    let mut i = 0;
    while i < log.len() {
        let rec = &log[i];
        let end = log[i + 1..]
            .iter()
            .position(LogRecord::is_player)
            .map_or(log.len(), |p| i + 1 + p);
        let group = &log[i..end];
        i = end;

        match rec.classification {
            RecordClass::Action => {
                let parsed = rec.command.as_ref().and_then(|c| {
                    c.verb
                        .parse::<Verb>()
                        .ok()
                        .map(|v| VerbObjectCommand::new(v, c.object.as_deref(), &rec.text))
                });
                let (result, next) = match parsed {
                    Some(cmd) => engine.execute(&cmd, &state),
                    None => (engine.unknown_verb(&rec.text), state.clone()),
                };
                if let Some(logged) = rec.outcome {
                    if logged != result.outcome {
                        return Err(CoherenceError::OutcomeMismatch {
                            seq: rec.seq,
                            logged,
                            replayed: result.outcome,
                        });
                    }
                }
                if result.is_success() {
                    state = next;
                }
            }
            RecordClass::Words => {
                let speaker = group.iter().skip(1).find_map(|r| match &r.role {
                    Role::Npc(id) if !r.fallback => Some(id.clone()),
                    _ => None,
                });
                if let Some(id) = speaker {
                    // keyword judging cannot fail
                    let _ = npc::interact(&mut state, spec, &id, &rec.text, &KeywordJudge);
                }
            }
            RecordClass::None => {}
        }

        for r in group {
            if r.event == Some(SystemEvent::Intro) {
                state = WorldState::fresh(spec);
                state.day = r.day;
            }
            check_label(r, &state, spec)?;
        }
    }
    Ok(())
}

fn check_label(rec: &LogRecord, state: &WorldState, spec: &WorldSpec) -> Result<(), CoherenceError> {
    let replayed = state.label(spec);
    if replayed != rec.state_label_after {
        return Err(CoherenceError::LabelMismatch {
            seq: rec.seq,
            logged: rec.state_label_after.clone(),
            replayed,
        });
    }
    Ok(())
}
