//! Rolling game history with a token estimate and summarization near the
//! provider's context budget.

use serde::{Deserialize, Serialize};

/// Estimates the token cost of a piece of text.
pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize;
}

/// `ceil(chars / n)`; the default uses four characters per token.
#[derive(Clone, Copy, Debug)]
pub struct CharsPerToken(pub usize);

impl Default for CharsPerToken {
    fn default() -> Self {
        Self(4)
    }
}

impl TokenEstimator for CharsPerToken {
    fn estimate(&self, text: &str) -> usize {
        let n = self.0.max(1);
        text.chars().count().div_ceil(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// Log role of the speaker (`player`, `npc:merlin`, ...).
    pub speaker: String,
    pub text: String,
    pub step: u32,
    pub day: u32,
}

impl Turn {
    pub fn render(&self) -> String {
        format!("{}: {}", self.speaker, self.text)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryWindow {
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub token_estimate: usize,
}

impl HistoryWindow {
    pub fn push(&mut self, turn: Turn, estimator: &dyn TokenEstimator) {
        self.turns.push(turn);
        self.recompute(estimator);
    }

    pub fn recompute(&mut self, estimator: &dyn TokenEstimator) {
        self.token_estimate = window_estimate(self.summary.as_deref(), &self.turns, estimator);
    }

    /// The whole window as plain text, summary first.
    pub fn transcript(&self) -> String {
        let mut lines = Vec::with_capacity(self.turns.len() + 1);
        if let Some(s) = &self.summary {
            lines.push(format!("summary: {s}"));
        }
        lines.extend(self.turns.iter().map(Turn::render));
        lines.join("\n")
    }
}

pub fn window_estimate(summary: Option<&str>, turns: &[Turn], estimator: &dyn TokenEstimator) -> usize {
    let summary = summary.map_or(0, |s| estimator.estimate(&format!("summary: {s}")));
    summary + turns.iter().map(|t| estimator.estimate(&t.render())).sum::<usize>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummarizeConfig {
    pub budget: usize,
    pub high_water: f64,
    /// Newest turns that are always kept verbatim.
    pub tail: usize,
}

impl Default for SummarizeConfig {
    fn default() -> Self {
        Self {
            budget: 6000,
            high_water: 0.8,
            tail: 10,
        }
    }
}

impl SummarizeConfig {
    pub fn needs_summary(&self, window: &HistoryWindow) -> bool {
        window.token_estimate as f64 > self.budget as f64 * self.high_water
    }
}

/// Cut `text` at a word boundary so that its estimate (with the `summary: `
/// prefix used in windows) fits in `max_tokens`.
pub fn fit_summary(text: &str, max_tokens: usize, estimator: &dyn TokenEstimator) -> Option<String> {
    let fits = |s: &str| estimator.estimate(&format!("summary: {s}")) <= max_tokens;
    if fits(text) {
        return Some(text.to_string());
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    let (mut lo, mut hi) = (0usize, words.len());
    // largest prefix that fits
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if fits(&format!("{} ...", words[..mid].join(" "))) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    (lo > 0).then(|| format!("{} ...", words[..lo].join(" ")))
}

/// Replace all but the newest `config.tail` turns with a summary produced by
/// `summarizer`, which receives the old turns (previous summary first) and a
/// token allowance. Windows under the high-water mark come back unchanged.
///
/// The result's estimate is within `config.budget` whenever the verbatim
/// tail fits in the budget; the tail is never shortened.
pub fn summarize_window<F>(
    window: &HistoryWindow,
    config: &SummarizeConfig,
    estimator: &dyn TokenEstimator,
    summarizer: F,
) -> HistoryWindow
where
    F: FnOnce(&[Turn], usize) -> String,
{
    let mut current = window.clone();
    current.recompute(estimator);
    if !config.needs_summary(&current) || current.turns.len() <= config.tail && current.summary.is_none() {
        return current;
    }
    let split = current.turns.len().saturating_sub(config.tail);
    let tail = current.turns[split..].to_vec();
    let tail_cost = window_estimate(None, &tail, estimator);
    let allowance = config.budget.saturating_sub(tail_cost);

    let mut old = Vec::with_capacity(split + 1);
    if let Some(s) = &current.summary {
        old.push(Turn {
            speaker: "summary".into(),
            text: s.clone(),
            step: 0,
            day: current.turns.first().map_or(1, |t| t.day),
        });
    }
    old.extend_from_slice(&current.turns[..split]);

    let summary = if old.is_empty() {
        None
    } else {
        fit_summary(&summarizer(&old, allowance), allowance, estimator)
    };
    let mut next = HistoryWindow {
        turns: tail,
        summary,
        token_estimate: 0,
    };
    next.recompute(estimator);
    next
}

/// Deterministic summary: the first few words of each old turn.
pub fn rule_summary(turns: &[Turn], max_tokens: usize) -> String {
    let mut parts = Vec::with_capacity(turns.len());
    for t in turns {
        let words: Vec<&str> = t.text.split_whitespace().take(8).collect();
        parts.push(format!("{} (day {}): {}", t.speaker, t.day, words.join(" ")));
    }
    let text = parts.join("; ");
    fit_summary(&text, max_tokens, &CharsPerToken::default()).unwrap_or_default()
}
