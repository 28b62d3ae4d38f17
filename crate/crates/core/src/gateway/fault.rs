//! Fault injection for testing the fallback paths.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{
    Classification, Evaluator, HistoryWindow, Normalized, Provider, ProviderError, RuleBasedProvider, Turn,
};
use crate::action::ActionResult;
use crate::narrative::{Category, StrategySpan};
use crate::npc::{NpcContext, UtteranceCondition};
use crate::session::LogRecord;
use crate::world::{WorldSpec, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultKind {
    Timeout,
    Transport,
    BadResponse,
    Unavailable,
}

impl FaultKind {
    fn error(self) -> ProviderError {
        match self {
            FaultKind::Timeout => ProviderError::Timeout,
            FaultKind::Transport => ProviderError::Transport("injected".into()),
            FaultKind::BadResponse => ProviderError::BadResponse("injected".into()),
            FaultKind::Unavailable => ProviderError::Unavailable("injected".into()),
        }
    }
}

/// Fails calls with `kind`. By default every call fails; with
/// [`failing_first`](Self::failing_first) only the first `n` do and the rest
/// go to the wrapped provider.
pub struct FaultyProvider {
    kind: FaultKind,
    inner: Arc<dyn Provider>,
    fail_first: Option<usize>,
    calls: AtomicUsize,
}

impl FaultyProvider {
    pub fn new(kind: FaultKind) -> Self {
        Self::wrapping(Arc::new(RuleBasedProvider::default()), kind)
    }

    pub fn wrapping(inner: Arc<dyn Provider>, kind: FaultKind) -> Self {
        Self {
            kind,
            inner,
            fail_first: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn failing_first(mut self, n: usize) -> Self {
        self.fail_first = Some(n);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn gate(&self) -> Result<&dyn Provider, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        match self.fail_first {
            Some(limit) if n >= limit => Ok(self.inner.as_ref()),
            _ => Err(self.kind.error()),
        }
    }
}

impl Provider for FaultyProvider {
    fn name(&self) -> &str {
        "faulty"
    }

    fn evaluator(&self) -> Evaluator {
        self.inner.evaluator()
    }

    fn classify(&self, raw: &str, at_npc: bool) -> Result<Classification, ProviderError> {
        self.gate()?.classify(raw, at_npc)
    }

    fn normalize(&self, raw: &str, world: &WorldSpec) -> Result<Normalized, ProviderError> {
        self.gate()?.normalize(raw, world)
    }

    fn npc_respond(&self, ctx: &NpcContext, utterance: &str, history: &HistoryWindow) -> Result<String, ProviderError> {
        self.gate()?.npc_respond(ctx, utterance, history)
    }

    fn game_feedback(
        &self,
        raw: &str,
        world: &WorldSpec,
        state: &WorldState,
        history: &HistoryWindow,
    ) -> Result<String, ProviderError> {
        self.gate()?.game_feedback(raw, world, state, history)
    }

    fn rewrite_failure(
        &self,
        raw: &str,
        failure: &ActionResult,
        npc: Option<&NpcContext>,
        history: &HistoryWindow,
    ) -> Result<String, ProviderError> {
        self.gate()?.rewrite_failure(raw, failure, npc, history)
    }

    fn summarize(&self, turns: &[Turn], max_tokens: usize) -> Result<String, ProviderError> {
        self.gate()?.summarize(turns, max_tokens)
    }

    fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError> {
        self.gate()?.judge(condition, utterance)
    }

    fn distill(&self, day: &[LogRecord], world: &WorldSpec) -> Result<Vec<StrategySpan>, ProviderError> {
        self.gate()?.distill(day, world)
    }

    fn match_summaries(&self, a: &str, b: &str) -> Result<bool, ProviderError> {
        self.gate()?.match_summaries(a, b)
    }

    fn categorize(&self, summary: &str) -> Result<Category, ProviderError> {
        self.gate()?.categorize(summary)
    }
}
