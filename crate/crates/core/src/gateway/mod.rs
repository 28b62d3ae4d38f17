//! Language-model gateway: input classification, command normalization,
//! failure rewriting, NPC voices, game feedback, history summaries, and the
//! analysis calls used by the narrative pipeline.
//!
//! [`Provider`] is the raw interface. [`Gateway`] wraps a provider and
//! applies the fallback contract so live play never stops on a provider
//! error.

mod fault;
mod history;
mod prompts;
mod remote;
mod rule;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use fault::{FaultKind, FaultyProvider};
pub use history::{
    fit_summary, rule_summary, summarize_window, window_estimate, CharsPerToken, HistoryWindow, SummarizeConfig,
    TokenEstimator, Turn,
};
pub use prompts::{PromptError, PromptSet};
pub use remote::{RemoteConfig, RemoteProvider};
pub use rule::{Lexicon, RuleBasedProvider, RuleTables};

use crate::action::{ActionResult, FailureCode, VerbObjectCommand};
use crate::narrative::{Category, StrategySpan};
use crate::npc::{Judge, NpcContext, UtteranceCondition};
use crate::session::LogRecord;
use crate::world::{WorldSpec, WorldState};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("empty input")]
    EmptyInput,
    #[error("provider timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unusable provider response: {0}")]
    BadResponse(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
}

impl ProviderError {
    /// Errors worth retrying (the request may succeed a second time).
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Timeout | Self::Transport(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Action,
    Words,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: InputKind,
    /// Rule id for the rule-based provider, free text for models.
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalized {
    Command(VerbObjectCommand),
    Unrecognized {
        raw: String,
        verb: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    RuleBased,
    Model,
}

/// One language-model backend. Every operation is total: it returns a value
/// or a typed error. Implementations must be shareable across sessions.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn evaluator(&self) -> Evaluator;

    fn classify(&self, raw: &str, at_npc: bool) -> Result<Classification, ProviderError>;

    fn normalize(&self, raw: &str, world: &WorldSpec) -> Result<Normalized, ProviderError>;

    fn npc_respond(&self, ctx: &NpcContext, utterance: &str, history: &HistoryWindow) -> Result<String, ProviderError>;

    /// Narration for words spoken where no NPC is around.
    fn game_feedback(
        &self,
        raw: &str,
        world: &WorldSpec,
        state: &WorldState,
        history: &HistoryWindow,
    ) -> Result<String, ProviderError>;

    /// A player-facing version of a failed action. When an NPC witnessed the
    /// attempt the reply is in their voice.
    fn rewrite_failure(
        &self,
        raw: &str,
        failure: &ActionResult,
        npc: Option<&NpcContext>,
        history: &HistoryWindow,
    ) -> Result<String, ProviderError>;

    fn summarize(&self, turns: &[Turn], max_tokens: usize) -> Result<String, ProviderError>;

    fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError>;

    /// Segment one day of log records into strategies.
    fn distill(&self, day: &[LogRecord], world: &WorldSpec) -> Result<Vec<StrategySpan>, ProviderError>;

    /// Whether two strategy summaries describe the same strategy.
    fn match_summaries(&self, a: &str, b: &str) -> Result<bool, ProviderError>;

    fn categorize(&self, summary: &str) -> Result<Category, ProviderError>;
}

/// A value from the gateway plus whether it came from a fallback path.
#[derive(Clone, Debug, PartialEq)]
pub struct Answer<T> {
    pub value: T,
    pub fallback: bool,
}

impl<T> Answer<T> {
    fn direct(value: T) -> Self {
        Self { value, fallback: false }
    }

    fn fallback(value: T) -> Self {
        Self { value, fallback: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GatewayConfig {
    pub summarize: SummarizeConfig,
}

/// Provider wrapper used by live play. Each call falls back to the
/// rule-based provider or to canonical text when the provider errors.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    rules: Arc<RuleBasedProvider>,
    config: GatewayConfig,
    estimator: Arc<dyn TokenEstimator>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        Self {
            provider,
            rules: Arc::new(RuleBasedProvider::default()),
            config: GatewayConfig::default(),
            estimator: Arc::new(CharsPerToken::default()),
        }
    }

    /// Gateway over the bundled rule-based provider.
    pub fn rule_based() -> Self {
        let rules = Arc::new(RuleBasedProvider::default());
        Self {
            provider: rules.clone(),
            rules,
            config: GatewayConfig::default(),
            estimator: Arc::new(CharsPerToken::default()),
        }
    }

    pub fn with_config(mut self, config: GatewayConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_estimator(mut self, estimator: Arc<dyn TokenEstimator>) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_fallback(mut self, rules: Arc<RuleBasedProvider>) -> Self {
        self.rules = rules;
        self
    }

    pub fn provider(&self) -> &Arc<dyn Provider> {
        &self.provider
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn estimator(&self) -> &dyn TokenEstimator {
        self.estimator.as_ref()
    }

    fn warn(&self, op: &str, err: &ProviderError) {
        log::warn!("provider `{}` failed on {op}: {err}; using fallback", self.provider.name());
    }

    pub fn classify(&self, raw: &str, at_npc: bool) -> Result<Answer<Classification>, ProviderError> {
        if raw.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        match self.provider.classify(raw, at_npc) {
            Ok(c) => Ok(Answer::direct(c)),
            Err(e) => {
                self.warn("classify", &e);
                self.rules.classify(raw, at_npc).map(Answer::fallback)
            }
        }
    }

    pub fn normalize(&self, raw: &str, world: &WorldSpec) -> Answer<Normalized> {
        match self.provider.normalize(raw, world) {
            Ok(n) => Answer::direct(n),
            Err(e) => {
                self.warn("normalize", &e);
                Answer::fallback(self.rules.normalize_rule(raw, world))
            }
        }
    }

    pub fn rewrite_failure(
        &self,
        raw: &str,
        failure: &ActionResult,
        npc: Option<&NpcContext>,
        history: &HistoryWindow,
    ) -> Answer<String> {
        match self.provider.rewrite_failure(raw, failure, npc, history) {
            Ok(s) if !s.trim().is_empty() => Answer::direct(s),
            Ok(_) => Answer::fallback(failure.message.clone()),
            Err(e) => {
                self.warn("rewrite_failure", &e);
                Answer::fallback(failure.message.clone())
            }
        }
    }

    pub fn npc_respond(&self, ctx: &NpcContext, utterance: &str, history: &HistoryWindow) -> Answer<String> {
        match self.provider.npc_respond(ctx, utterance, history) {
            Ok(s) if !s.trim().is_empty() => Answer::direct(s),
            Ok(_) => Answer::fallback(stall_line(&ctx.name)),
            Err(e) => {
                self.warn("npc_respond", &e);
                Answer::fallback(stall_line(&ctx.name))
            }
        }
    }

    pub fn game_feedback(
        &self,
        raw: &str,
        world: &WorldSpec,
        state: &WorldState,
        history: &HistoryWindow,
    ) -> Answer<String> {
        let fallback = || {
            world
                .location(&state.current_location)
                .map(|l| crate::action::describe_location(world, state, l))
                .unwrap_or_default()
        };
        match self.provider.game_feedback(raw, world, state, history) {
            Ok(s) if !s.trim().is_empty() => Answer::direct(s),
            Ok(_) => Answer::fallback(fallback()),
            Err(e) => {
                self.warn("game_feedback", &e);
                Answer::fallback(fallback())
            }
        }
    }

    /// Errors are surfaced: the caller must not advance a goal on a failed
    /// judgment.
    pub fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError> {
        self.provider.judge(condition, utterance)
    }

    /// Summarize `window` if it is over the high-water mark.
    pub fn maybe_summarize(&self, window: &HistoryWindow) -> Answer<HistoryWindow> {
        let cfg = &self.config.summarize;
        let mut failed = false;
        let out = summarize_window(window, cfg, self.estimator.as_ref(), |turns, max| {
            match self.provider.summarize(turns, max) {
                Ok(s) => s,
                Err(e) => {
                    self.warn("summarize", &e);
                    failed = true;
                    rule_summary(turns, max)
                }
            }
        });
        Answer {
            value: out,
            fallback: failed,
        }
    }
}

impl Judge for Gateway {
    fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError> {
        Gateway::judge(self, condition, utterance)
    }
}

/// Line used when an NPC's provider call fails.
pub fn stall_line(name: &str) -> String {
    format!("{name} seems lost in thought.")
}

/// Whether a failure code came from the verb check rather than the world.
pub fn is_verb_failure(failure: &ActionResult) -> bool {
    failure.failure_code == Some(FailureCode::UnknownVerb)
}
