//! Deterministic, table-driven provider. Every answer is a pure function of
//! the inputs and the bundled rule tables, which makes it the offline
//! reference for tests and the fallback for live play.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    rule_summary, Classification, Evaluator, HistoryWindow, InputKind, Normalized, Provider, ProviderError, Turn,
};
use crate::action::{describe_location, ActionResult, FailureCode, Verb, VerbObjectCommand};
use crate::narrative::{rule_distill, Category, PhraseTable, StrategySpan};
use crate::npc::{normalize_words, KeywordReply, NpcContext, NpcEvent, UtteranceCondition};
use crate::session::LogRecord;
use crate::world::{Placement, WorldSpec, WorldState};

pub const LEXICON: &str = include_str!("../../assets/rules/lexicon.json");
pub const PHRASES: &str = include_str!("../../assets/rules/phrases.json");
pub const SYNONYMS: &str = include_str!("../../assets/rules/synonyms.json");
pub const CATEGORIES: &str = include_str!("../../assets/rules/categories.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseTemplates {
    pub failure_rewrite: String,
    pub inventory_refusal: String,
    pub inventory_words: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub verbs: BTreeMap<Verb, Vec<String>>,
    pub lead_ins: Vec<String>,
    pub directions: Vec<String>,
    pub direction_abbreviations: BTreeMap<String, String>,
    pub articles: Vec<String>,
    pub imperative_verbs: Vec<String>,
    pub not_imperative: Vec<String>,
    pub question_words: Vec<String>,
    pub second_person: Vec<String>,
    pub vocatives: Vec<String>,
    pub first_person: Vec<String>,
    pub request_me: Vec<String>,
    pub templates: ResponseTemplates,
}

/// Token canonicalization for the summary matcher.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynonymTable {
    pub stopwords: Vec<String>,
    /// canonical token -> words that map onto it
    pub canonical: BTreeMap<String, Vec<String>>,
    /// entity key -> surface phrases, matched before tokenizing
    pub entities: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub category: Category,
    /// Lowercase substrings; any one is enough.
    pub keywords: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryTable(pub Vec<CategoryRule>);

#[derive(Debug, thiserror::Error)]
#[error("rule table `{table}` is invalid: {source}")]
pub struct TableError {
    pub table: &'static str,
    #[source]
    pub source: serde_json::Error,
}

/// All data the rule-based provider runs on.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleTables {
    pub lexicon: Lexicon,
    pub phrases: PhraseTable,
    pub synonyms: SynonymTable,
    pub categories: CategoryTable,
}

fn parse<T: serde::de::DeserializeOwned>(table: &'static str, doc: &str) -> Result<T, TableError> {
    serde_json::from_str(doc).map_err(|source| TableError { table, source })
}

impl RuleTables {
    pub fn from_json(lexicon: &str, phrases: &str, synonyms: &str, categories: &str) -> Result<Self, TableError> {
        Ok(Self {
            lexicon: parse("lexicon", lexicon)?,
            phrases: parse("phrases", phrases)?,
            synonyms: parse("synonyms", synonyms)?,
            categories: parse("categories", categories)?,
        })
    }

    pub fn bundled() -> Self {
        Self::from_json(LEXICON, PHRASES, SYNONYMS, CATEGORIES).expect("bundled rule tables are valid")
    }
}

fn words_of(text: &str) -> Vec<String> {
    normalize_words(text).split_whitespace().map(str::to_string).collect()
}

fn phrase_words(phrase: &str) -> Vec<String> {
    words_of(phrase)
}

fn starts_with_words(words: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && words.len() >= phrase.len() && words[..phrase.len()] == *phrase
}

fn find_words(words: &[String], phrase: &[String]) -> Option<usize> {
    if phrase.is_empty() || phrase.len() > words.len() {
        return None;
    }
    (0..=words.len() - phrase.len()).find(|&i| words[i..i + phrase.len()] == *phrase)
}

/// Word equality that tolerates a plural `s`/`es`/`ies` on the text side.
fn word_matches(word: &str, key: &str) -> bool {
    word == key
        || word.strip_suffix('s') == Some(key)
        || word.strip_suffix("es") == Some(key)
        || key
            .strip_suffix('y')
            .is_some_and(|stem| word.strip_suffix("ies") == Some(stem))
}

fn contains_loose(words: &[String], phrase: &str) -> bool {
    let key = phrase_words(phrase);
    if key.is_empty() || key.len() > words.len() {
        return false;
    }
    (0..=words.len() - key.len()).any(|i| key.iter().enumerate().all(|(j, k)| word_matches(&words[i + j], k)))
}

fn keyword_reply<'a>(replies: &'a [KeywordReply], text: &str) -> Option<&'a str> {
    let words = words_of(text);
    replies
        .iter()
        .find(|r| !r.keywords.is_empty() && r.keywords.iter().all(|k| contains_loose(&words, k)))
        .map(|r| r.reply.as_str())
}

/// The rule-based provider.
#[derive(Clone, Debug)]
pub struct RuleBasedProvider {
    tables: RuleTables,
    /// Rewrite unknown-verb failures with the "You tried to ..." template
    /// instead of passing the canonical text through.
    rewrite_template: bool,
    /// Verb synonyms as word lists, longest first.
    verb_phrases: Vec<(Verb, Vec<String>)>,
}

impl Default for RuleBasedProvider {
    fn default() -> Self {
        Self::new(RuleTables::bundled())
    }
}

impl RuleBasedProvider {
    pub fn new(tables: RuleTables) -> Self {
        let mut verb_phrases: Vec<(Verb, Vec<String>)> = tables
            .lexicon
            .verbs
            .iter()
            .flat_map(|(verb, syns)| syns.iter().map(move |s| (*verb, phrase_words(s))))
            .filter(|(_, w)| !w.is_empty())
            .collect();
        verb_phrases.sort_by(|a, b| {
            b.1.len()
                .cmp(&a.1.len())
                .then_with(|| b.1.join(" ").len().cmp(&a.1.join(" ").len()))
                .then_with(|| a.1.cmp(&b.1))
        });
        Self {
            tables,
            rewrite_template: false,
            verb_phrases,
        }
    }

    pub fn with_rewrite_template(mut self, enabled: bool) -> Self {
        self.rewrite_template = enabled;
        self
    }

    pub fn tables(&self) -> &RuleTables {
        &self.tables
    }

    fn lex(&self) -> &Lexicon {
        &self.tables.lexicon
    }

    fn strip_lead_ins(&self, mut words: Vec<String>) -> Vec<String> {
        loop {
            let hit = self
                .lex()
                .lead_ins
                .iter()
                .map(|l| phrase_words(l))
                .find(|l| starts_with_words(&words, l) && words.len() > l.len());
            match hit {
                Some(l) => {
                    words.drain(..l.len());
                }
                None => return words,
            }
        }
    }

    fn strip_articles(&self, words: &[String]) -> Vec<String> {
        let articles = &self.lex().articles;
        let mut start = 0;
        while start < words.len() && articles.contains(&words[start]) {
            start += 1;
        }
        words[start..]
            .iter()
            .filter(|w| *w != "the" && *w != "a" && *w != "an")
            .cloned()
            .collect()
    }

    /// Match the leading canonical verb phrase. Single-letter synonyms and
    /// inventory synonyms only count when they are the whole command.
    fn match_verb(&self, words: &[String]) -> Option<(Verb, usize)> {
        self.verb_phrases.iter().find_map(|(verb, phrase)| {
            if !starts_with_words(words, phrase) {
                return None;
            }
            let whole_only = *verb == Verb::Inventory || (phrase.len() == 1 && phrase[0].len() == 1);
            if whole_only && words.len() != phrase.len() {
                return None;
            }
            Some((*verb, phrase.len()))
        })
    }

    fn direction(&self, words: &[String]) -> Option<String> {
        if words.len() != 1 {
            return None;
        }
        let w = &words[0];
        if self.lex().directions.contains(w) {
            return Some(w.clone());
        }
        self.lex().direction_abbreviations.get(w).cloned()
    }

    /// Longest object name or alias contained in `words`.
    fn contained_object<'w>(&self, words: &[String], world: &'w WorldSpec) -> Option<&'w str> {
        let mut best: Option<(usize, &str)> = None;
        for obj in &world.objects {
            for name in std::iter::once(&obj.name).chain(&obj.aliases) {
                let phrase = phrase_words(name);
                if find_words(words, &phrase).is_some() && best.is_none_or(|(n, _)| phrase.len() > n) {
                    best = Some((phrase.len(), obj.name.as_str()));
                }
            }
        }
        best.map(|(_, n)| n)
    }

    fn contained_location<'w>(&self, words: &[String], world: &'w WorldSpec) -> Option<&'w str> {
        let mut best: Option<(usize, &str)> = None;
        for loc in &world.locations {
            let names = [loc.id.as_str(), loc.name.as_str(), loc.title.as_str()];
            for name in names.into_iter().chain(loc.aliases.iter().map(String::as_str)) {
                let phrase = phrase_words(&name.replace('_', " "));
                if find_words(words, &phrase).is_some() && best.is_none_or(|(n, _)| phrase.len() > n) {
                    best = Some((phrase.len(), loc.name.as_str()));
                }
            }
        }
        best.map(|(_, n)| n)
    }

    /// Location name of an NPC mentioned in `words`.
    fn npc_location<'w>(&self, words: &[String], world: &'w WorldSpec) -> Option<&'w str> {
        world.npcs.iter().find_map(|npc| {
            let full = phrase_words(&npc.name);
            let hit = find_words(words, &full).is_some()
                || full.iter().any(|w| w.len() > 3 && words.contains(w))
                || words.iter().any(|w| w == &npc.id.as_str().replace('_', " "));
            if hit {
                world.location(&npc.location).map(|l| l.name.as_str())
            } else {
                None
            }
        })
    }

    fn resolve_object(&self, verb: Verb, rest: &[String], world: &WorldSpec) -> Option<String> {
        let rest = self.strip_articles(rest);
        if rest.is_empty() {
            return None;
        }
        match verb {
            Verb::Look | Verb::Inventory | Verb::Wait | Verb::Combine => None,
            Verb::Defuse => Some("bomb".to_string()),
            Verb::Go => {
                if let Some(dir) = self.direction(&rest) {
                    return Some(dir);
                }
                self.contained_location(&rest, world)
                    .or_else(|| self.npc_location(&rest, world))
                    .map(str::to_string)
                    .or_else(|| Some(rest.join(" ")))
            }
            _ => {
                if let Some(obj) = self.contained_object(&rest, world) {
                    return Some(obj.to_string());
                }
                if rest.iter().any(|w| w == "bomb") {
                    return Some("bomb".to_string());
                }
                if let Some(npc) = world.npcs.iter().find(|n| {
                    let full = phrase_words(&n.name);
                    find_words(&rest, &full).is_some() || full.iter().any(|w| w.len() > 3 && rest.contains(w))
                }) {
                    return Some(npc.name.clone());
                }
                if let Some(loc) = self.contained_location(&rest, world) {
                    return Some(loc.to_string());
                }
                let cut = rest
                    .iter()
                    .position(|w| ["to", "for", "near", "with", "at", "in", "on", "from"].contains(&w.as_str()))
                    .filter(|&i| i > 0)
                    .unwrap_or(rest.len());
                Some(rest[..cut].join(" "))
            }
        }
    }

    /// Verb-object normalization from the synonym table.
    pub fn normalize_rule(&self, raw: &str, world: &WorldSpec) -> Normalized {
        let words = self.strip_lead_ins(words_of(raw));
        let unrecognized = |verb: String, object: Option<String>| Normalized::Unrecognized {
            raw: raw.to_string(),
            verb,
            object,
        };
        if words.is_empty() {
            return unrecognized(String::new(), None);
        }
        if let Some(dir) = self.direction(&words) {
            return Normalized::Command(VerbObjectCommand::new(Verb::Go, Some(&dir), raw));
        }
        match self.match_verb(&words) {
            Some((verb, n)) => {
                let object = self.resolve_object(verb, &words[n..], world);
                Normalized::Command(VerbObjectCommand::new(verb, object.as_deref(), raw))
            }
            None => {
                let rest = self.strip_articles(&words[1..]);
                unrecognized(words[0].clone(), (!rest.is_empty()).then(|| rest.join(" ")))
            }
        }
    }

    pub fn classify_rule(&self, raw: &str, at_npc: bool, world: Option<&WorldSpec>) -> Result<Classification, ProviderError> {
        if raw.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let rule = |kind, note: &str| {
            Ok(Classification {
                kind,
                note: note.to_string(),
            })
        };
        let original = words_of(raw);
        let stripped = self.strip_lead_ins(original.clone());
        if self.direction(&stripped).is_some() || self.match_verb(&stripped).is_some() {
            return rule(InputKind::Action, "canonical_verb");
        }
        let _ = world;
        let lex = self.lex();
        if raw.contains('?') {
            return rule(InputKind::Words, "question_mark");
        }
        let starts = |list: &[String]| list.iter().any(|p| starts_with_words(&original, &phrase_words(p)));
        if original.first().is_some_and(|w| lex.question_words.contains(w)) {
            return rule(InputKind::Words, "question_word");
        }
        if original.iter().any(|w| lex.second_person.contains(w)) {
            return rule(InputKind::Words, "second_person");
        }
        if starts(&lex.vocatives) {
            return rule(InputKind::Words, "vocative");
        }
        if starts(&lex.first_person) {
            return rule(InputKind::Words, "first_person");
        }
        if starts(&lex.request_me) {
            return rule(InputKind::Words, "request_me");
        }
        if stripped
            .first()
            .is_some_and(|w| lex.imperative_verbs.contains(w) && !lex.not_imperative.contains(w))
        {
            return rule(InputKind::Action, "imperative_verb");
        }
        if at_npc {
            rule(InputKind::Words, "npc_present")
        } else {
            rule(InputKind::Action, "default_action")
        }
    }

    fn npc_reply(&self, ctx: &NpcContext, utterance: &str) -> String {
        let t = &ctx.templates;
        match &ctx.event {
            NpcEvent::Arrival => t.greeting.clone(),
            NpcEvent::FailedAction { attempt } => keyword_reply(&t.reactions, attempt)
                .unwrap_or(&t.default_reaction)
                .to_string(),
            NpcEvent::Utterance { satisfied: Some(s) } => s.reply.clone(),
            NpcEvent::Utterance { satisfied: None } => keyword_reply(&t.smalltalk, utterance)
                .map(str::to_string)
                .or_else(|| t.reply_unmet.clone())
                .unwrap_or_else(|| t.finished_reply.clone()),
        }
    }

    fn feedback(&self, raw: &str, world: &WorldSpec, state: &WorldState) -> String {
        let words = words_of(raw);
        let here = &state.current_location;
        let mut best: Option<(usize, &str)> = None;
        for obj in &world.objects {
            let visible = match state.placement(&obj.id) {
                Some(Placement::At(l)) => l == here,
                Some(Placement::Inventory) => true,
                _ => false,
            };
            if !visible {
                continue;
            }
            for name in std::iter::once(&obj.name).chain(&obj.aliases) {
                let phrase = phrase_words(name);
                if find_words(&words, &phrase).is_some() && best.is_none_or(|(n, _)| phrase.len() > n) {
                    best = Some((phrase.len(), obj.description.as_str()));
                }
            }
        }
        let tpl = &self.lex().templates;
        if tpl.inventory_words.iter().any(|w| words.contains(w)) {
            let noun = words
                .iter()
                .position(|w| w == "the")
                .and_then(|i| words.get(i + 1))
                .filter(|n| world.find_object(n).is_none());
            if let Some(noun) = noun {
                return tpl.inventory_refusal.replace("{object}", noun);
            }
        }
        if let Some((_, description)) = best {
            return description.to_string();
        }
        world
            .location(here)
            .map(|l| describe_location(world, state, l))
            .unwrap_or_default()
    }

    /// Canonical token set used by the summary matcher.
    pub fn canonical_tokens(&self, summary: &str) -> BTreeSet<String> {
        let syn = &self.tables.synonyms;
        let mut words = words_of(summary)
            .into_iter()
            .map(|w| w.strip_suffix("'s").map(str::to_string).unwrap_or(w))
            .collect::<Vec<_>>();
        let mut tokens = BTreeSet::new();
        // entities first, longest phrase first
        let mut phrases: Vec<(&String, Vec<String>)> = syn
            .entities
            .iter()
            .flat_map(|(k, ps)| ps.iter().map(move |p| (k, phrase_words(p))))
            .collect();
        phrases.sort_by_key(|p| std::cmp::Reverse(p.1.len()));
        for (key, phrase) in phrases {
            while let Some(i) = find_words(&words, &phrase) {
                tokens.insert(key.clone());
                words.drain(i..i + phrase.len());
            }
        }
        for w in words {
            if syn.stopwords.contains(&w) {
                continue;
            }
            let canon = syn
                .canonical
                .iter()
                .find(|(k, alts)| **k == w || alts.contains(&w))
                .map(|(k, _)| k.clone())
                .unwrap_or(w);
            tokens.insert(canon);
        }
        tokens
    }

    pub fn categorize_rule(&self, summary: &str) -> Category {
        let text = summary.to_lowercase();
        self.tables
            .categories
            .0
            .iter()
            .find(|r| r.keywords.iter().any(|k| text.contains(k.as_str())))
            .map(|r| r.category)
            .unwrap_or(Category::Other)
    }
}

impl Provider for RuleBasedProvider {
    fn name(&self) -> &str {
        "rule"
    }

    fn evaluator(&self) -> Evaluator {
        Evaluator::RuleBased
    }

    fn classify(&self, raw: &str, at_npc: bool) -> Result<Classification, ProviderError> {
        self.classify_rule(raw, at_npc, None)
    }

    fn normalize(&self, raw: &str, world: &WorldSpec) -> Result<Normalized, ProviderError> {
        Ok(self.normalize_rule(raw, world))
    }

    fn npc_respond(&self, ctx: &NpcContext, utterance: &str, _history: &HistoryWindow) -> Result<String, ProviderError> {
        Ok(self.npc_reply(ctx, utterance))
    }

    fn game_feedback(
        &self,
        raw: &str,
        world: &WorldSpec,
        state: &WorldState,
        _history: &HistoryWindow,
    ) -> Result<String, ProviderError> {
        Ok(self.feedback(raw, world, state))
    }

    fn rewrite_failure(
        &self,
        raw: &str,
        failure: &ActionResult,
        npc: Option<&NpcContext>,
        _history: &HistoryWindow,
    ) -> Result<String, ProviderError> {
        if let Some(ctx) = npc {
            return Ok(self.npc_reply(ctx, raw));
        }
        if self.rewrite_template && failure.failure_code == Some(FailureCode::UnknownVerb) {
            let attempt = raw.trim().trim_end_matches(['.', '!', '?']).trim();
            let mut chars = attempt.chars();
            let attempt = match chars.next() {
                Some(c) => c.to_lowercase().chain(chars).collect::<String>(),
                None => String::new(),
            };
            return Ok(self.lex().templates.failure_rewrite.replace("{raw}", &attempt));
        }
        Ok(failure.message.clone())
    }

    fn summarize(&self, turns: &[Turn], max_tokens: usize) -> Result<String, ProviderError> {
        Ok(rule_summary(turns, max_tokens))
    }

    fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError> {
        Ok(condition.keywords_match(utterance))
    }

    fn distill(&self, day: &[LogRecord], world: &WorldSpec) -> Result<Vec<StrategySpan>, ProviderError> {
        Ok(rule_distill(day, world, &self.tables.phrases))
    }

    fn match_summaries(&self, a: &str, b: &str) -> Result<bool, ProviderError> {
        Ok(self.canonical_tokens(a) == self.canonical_tokens(b))
    }

    fn categorize(&self, summary: &str) -> Result<Category, ProviderError> {
        Ok(self.categorize_rule(summary))
    }
}
