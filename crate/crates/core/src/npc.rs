//! NPC goal/condition chains.
//!
//! Each NPC walks an ordered list of goals. A goal is held until its
//! condition is met; meeting it releases the goal's effects (milestone flags
//! and a clue) and moves on to the next goal. Conditions on player speech
//! carry two evaluators: keyword sets for deterministic offline play and a
//! natural-language instruction for a model judge.

use serde::{Deserialize, Serialize};

use crate::gateway::{HistoryWindow, ProviderError};
use crate::world::{FlagId, LocationId, NpcId, WorldSpec, WorldState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpcSpec {
    pub id: NpcId,
    pub name: String,
    pub location: LocationId,
    pub persona: String,
    pub backstory: String,
    /// Sentence added to the location description while the NPC is present.
    pub presence_text: String,
    pub greeting: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<FlagId>,
    pub goals: Vec<NpcGoal>,
    /// Topical canned replies used by the rule-based provider.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub smalltalk: Vec<KeywordReply>,
    /// How the NPC reacts to a failed action performed in front of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reactions: Vec<KeywordReply>,
    pub default_reaction: String,
    /// Reply once every goal has been completed.
    pub finished_reply: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeywordReply {
    pub keywords: Vec<String>,
    pub reply: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpcGoal {
    pub goal_prompt: String,
    pub condition: Condition,
    #[serde(default)]
    pub on_satisfied: Effects,
    /// Rule-based reply while the condition is unmet.
    pub reply_unmet: String,
    /// Rule-based reply on the turn the condition is met.
    pub reply_met: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<FlagId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clue: Option<String>,
}

impl Effects {
    pub fn is_empty(&self) -> bool {
        self.flags.is_empty() && self.clue.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    FlagSet { flag: FlagId },
    UtteranceMatches(UtteranceCondition),
    Always,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceCondition {
    /// Alternatives; the condition holds when every keyword of any one set
    /// occurs in the utterance as a whole word or phrase.
    pub keywords: Vec<Vec<String>>,
    /// What a model judge is asked to decide.
    pub instruction: String,
    /// What the NPC itself is told about the condition, when the
    /// instruction gives away an answer. Defaults to the instruction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl UtteranceCondition {
    pub fn keywords_match(&self, utterance: &str) -> bool {
        let text = normalize_words(utterance);
        if text.trim().is_empty() {
            return false;
        }
        self.keywords
            .iter()
            .any(|set| !set.is_empty() && set.iter().all(|k| contains_phrase(&text, k)))
    }
}

/// Lowercase, strip punctuation, collapse whitespace, pad with spaces so
/// phrases can be matched on word boundaries.
pub fn normalize_words(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push(' ');
    for word in s
        .to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
    {
        out.push_str(word.trim_matches('\''));
        out.push(' ');
    }
    out
}

/// `text` must come from [`normalize_words`].
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let phrase = normalize_words(phrase);
    phrase.trim().is_empty() || text.contains(&phrase) || text.replace("'s ", " ").contains(&phrase)
}

/// Decides utterance conditions. The rule-based provider answers from the
/// keyword sets; a model provider answers from the instruction.
pub trait Judge {
    fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError>;
}

/// The keyword evaluator on its own.
pub struct KeywordJudge;

impl Judge for KeywordJudge {
    fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError> {
        Ok(condition.keywords_match(utterance))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Player,
    Npc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NpcRuntime {
    pub npc: NpcId,
    pub goal_index: usize,
    pub activated: bool,
    pub window: Vec<ConversationTurn>,
}

impl NpcRuntime {
    pub fn new(npc: NpcId) -> Self {
        Self {
            npc,
            goal_index: 0,
            activated: false,
            window: Vec::new(),
        }
    }
}

pub(crate) fn referenced_flags(spec: &NpcSpec) -> impl Iterator<Item = &FlagId> {
    spec.activation.iter().chain(spec.goals.iter().flat_map(|g| {
        let cond = match &g.condition {
            Condition::FlagSet { flag } => Some(flag),
            _ => None,
        };
        cond.into_iter().chain(g.on_satisfied.flags.iter())
    }))
}

/// The NPC standing at `location`, if it has been activated.
pub fn npc_present<'a>(location: &LocationId, state: &WorldState, spec: &'a WorldSpec) -> Option<&'a NpcSpec> {
    spec.npcs.iter().find(|n| {
        &n.location == location && state.npcs.get(&n.id).is_some_and(|rt| rt.activated)
    })
}

pub fn evaluate_condition(
    condition: &Condition,
    utterance: &str,
    state: &WorldState,
    spec: &WorldSpec,
    judge: &dyn Judge,
) -> Result<bool, ProviderError> {
    match condition {
        Condition::FlagSet { flag } => Ok(state.has_flag(spec, flag)),
        Condition::Always => Ok(!utterance.trim().is_empty()),
        Condition::UtteranceMatches(cond) => {
            if utterance.trim().is_empty() {
                return Ok(false);
            }
            judge.judge(cond, utterance)
        }
    }
}

/// Try to move `npc` past its current goal. At most one goal advances per
/// utterance. Effects are returned, not applied.
pub fn advance_npc(
    npc: &NpcRuntime,
    utterance: &str,
    state: &WorldState,
    spec: &WorldSpec,
    judge: &dyn Judge,
) -> Result<(NpcRuntime, Effects), ProviderError> {
    let Some(npc_spec) = spec.npc(&npc.npc) else {
        return Ok((npc.clone(), Effects::default()));
    };
    if !npc.activated {
        return Ok((npc.clone(), Effects::default()));
    }
    let Some(goal) = npc_spec.goals.get(npc.goal_index) else {
        return Ok((npc.clone(), Effects::default()));
    };
    if evaluate_condition(&goal.condition, utterance, state, spec, judge)? {
        let mut next = npc.clone();
        next.goal_index += 1;
        Ok((next, goal.on_satisfied.clone()))
    } else {
        Ok((npc.clone(), Effects::default()))
    }
}

/// Outcome of one player utterance addressed to an NPC.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    /// Index of the goal satisfied by this utterance.
    pub satisfied_goal: Option<usize>,
    pub effects: Effects,
}

/// Run [`advance_npc`] and apply its effects to `state`, recording the
/// player's utterance in the NPC's conversation window.
pub fn interact(
    state: &mut WorldState,
    spec: &WorldSpec,
    npc: &NpcId,
    utterance: &str,
    judge: &dyn Judge,
) -> Result<Interaction, ProviderError> {
    let Some(runtime) = state.npcs.get(npc).cloned() else {
        return Ok(Interaction {
            satisfied_goal: None,
            effects: Effects::default(),
        });
    };
    let (mut next, effects) = advance_npc(&runtime, utterance, state, spec, judge)?;
    let satisfied_goal = (next.goal_index > runtime.goal_index).then_some(runtime.goal_index);
    next.window.push(ConversationTurn {
        speaker: Speaker::Player,
        text: utterance.to_string(),
    });
    state.npcs.insert(npc.clone(), next);
    for flag in &effects.flags {
        // flags were checked at load time
        state.set_flag(spec, flag).expect("npc effect flag exists in spec");
    }
    Ok(Interaction {
        satisfied_goal,
        effects,
    })
}

pub fn record_npc_line(state: &mut WorldState, npc: &NpcId, text: &str) {
    if let Some(rt) = state.npcs.get_mut(npc) {
        rt.window.push(ConversationTurn {
            speaker: Speaker::Npc,
            text: text.to_string(),
        });
    }
}

/// What prompted the NPC to speak this turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NpcEvent {
    /// The player just walked in.
    Arrival,
    /// The player spoke. `satisfied` holds the reply and clue released when
    /// the utterance met the current goal's condition.
    Utterance { satisfied: Option<Satisfied> },
    /// The player attempted an action that failed in front of the NPC.
    FailedAction { attempt: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Satisfied {
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clue: Option<String>,
}

/// Everything a provider needs to voice an NPC for one turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpcContext {
    pub npc: NpcId,
    pub name: String,
    pub persona: String,
    pub backstory: String,
    pub location_title: String,
    /// `None` once every goal is complete.
    pub goal_prompt: Option<String>,
    /// Description of the condition the player still has to meet; never the
    /// reward behind it.
    pub unmet_condition: Option<String>,
    pub clues: Vec<String>,
    pub window: Vec<ConversationTurn>,
    pub history_summary: Option<String>,
    pub event: NpcEvent,
    pub templates: RuleTemplates,
}

/// Canned lines for the rule-based provider, limited to what the NPC may say
/// at its current goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleTemplates {
    pub greeting: String,
    pub reply_unmet: Option<String>,
    pub finished_reply: String,
    pub smalltalk: Vec<KeywordReply>,
    pub reactions: Vec<KeywordReply>,
    pub default_reaction: String,
}

fn describe_condition(cond: &Condition, spec: &WorldSpec) -> String {
    match cond {
        Condition::FlagSet { flag } => {
            let _ = spec;
            format!("the player has achieved `{flag}`")
        }
        Condition::UtteranceMatches(u) => u.hint.clone().unwrap_or_else(|| u.instruction.clone()),
        Condition::Always => "the player says anything at all".to_string(),
    }
}

/// Assemble the provider context for `npc`, or `None` if the NPC cannot be
/// reached right now (not activated, or standing in an unrevealed room).
pub fn build_npc_context(
    npc: &NpcId,
    state: &WorldState,
    spec: &WorldSpec,
    history: &HistoryWindow,
    event: NpcEvent,
) -> Option<NpcContext> {
    let npc_spec = spec.npc(npc)?;
    let runtime = state.npcs.get(npc)?;
    if !runtime.activated {
        return None;
    }
    let location = spec.location(&npc_spec.location)?;
    if !spec.is_revealed(location, state) {
        return None;
    }
    let goal = npc_spec.goals.get(runtime.goal_index);
    let clues = npc_spec.goals[..runtime.goal_index.min(npc_spec.goals.len())]
        .iter()
        .filter_map(|g| g.on_satisfied.clue.clone())
        .collect();
    Some(NpcContext {
        npc: npc.clone(),
        name: npc_spec.name.clone(),
        persona: npc_spec.persona.clone(),
        backstory: npc_spec.backstory.clone(),
        location_title: location.title.clone(),
        goal_prompt: goal.map(|g| g.goal_prompt.clone()),
        unmet_condition: goal.map(|g| describe_condition(&g.condition, spec)),
        clues,
        window: runtime.window.clone(),
        history_summary: history.summary.clone(),
        event,
        templates: RuleTemplates {
            greeting: npc_spec.greeting.clone(),
            reply_unmet: goal.map(|g| g.reply_unmet.clone()),
            finished_reply: npc_spec.finished_reply.clone(),
            smalltalk: npc_spec.smalltalk.clone(),
            reactions: npc_spec.reactions.clone(),
            default_reaction: npc_spec.default_reaction.clone(),
        },
    })
}
