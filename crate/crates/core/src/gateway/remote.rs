//! HTTP chat-completion provider.
//!
//! Wire format: `POST endpoint` with `{"model", "messages": [{"role",
//! "content"}]}`; the reply is `{"content": "..."}` or the common
//! `{"choices": [{"message": {"content": "..."}}]}` shape.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Classification, Evaluator, HistoryWindow, InputKind, Normalized, PromptSet, Provider, ProviderError, Turn,
};
use crate::action::{supported_verbs, ActionResult, Verb, VerbObjectCommand};
use crate::narrative::{Category, StrategySpan};
use crate::npc::{NpcContext, NpcEvent, Speaker, UtteranceCondition};
use crate::session::LogRecord;
use crate::world::{WorldSpec, WorldState};

fn default_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    1
}

fn default_backoff() -> u64 {
    500
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Never serialized; supplied from the environment at startup.
    #[serde(skip)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    prompts: PromptSet,
    agent: ureq::Agent,
}

fn map_error(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ProviderError::Timeout,
        ureq::Error::Json(e) => ProviderError::BadResponse(e.to_string()),
        other => ProviderError::Transport(other.to_string()),
    }
}

fn extract_content(body: &Value) -> Option<&str> {
    body.get("content")
        .and_then(Value::as_str)
        .or_else(|| body.pointer("/choices/0/message/content").and_then(Value::as_str))
}

/// First JSON value embedded in a model reply (models like to wrap JSON in
/// prose or code fences).
fn embedded_json(text: &str) -> Option<Value> {
    let start = text.find(['{', '['])?;
    let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
    stream.next()?.ok()
}

fn yes_no(text: &str) -> Result<bool, ProviderError> {
    let first = text
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| !w.is_empty())
        .unwrap_or("")
        .to_lowercase();
    match first.as_str() {
        "yes" | "true" => Ok(true),
        "no" | "false" => Ok(false),
        _ => Err(ProviderError::BadResponse(format!("expected yes/no, got `{text}`"))),
    }
}

fn render_window(ctx: &NpcContext) -> String {
    ctx.window
        .iter()
        .map(|t| {
            let who = match t.speaker {
                Speaker::Player => "Player",
                Speaker::Npc => ctx.name.as_str(),
            };
            format!("{who}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn describe_event(ev: &NpcEvent) -> String {
    match ev {
        NpcEvent::Arrival => "The player just arrived.".into(),
        NpcEvent::Utterance { satisfied: None } => "The player spoke to you.".into(),
        NpcEvent::Utterance {
            satisfied: Some(s),
        } => format!(
            "The player did what you wanted. Respond warmly and share this: {} {}",
            s.reply,
            s.clue.as_deref().unwrap_or("")
        ),
        NpcEvent::FailedAction { attempt } => format!("The player tried to `{attempt}` and it did not work."),
    }
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        Self::with_prompts(config, PromptSet::default())
    }

    pub fn with_prompts(config: RemoteConfig, prompts: PromptSet) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, prompts, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn send_once(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(map_error)?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            408 | 504 => return Err(ProviderError::Timeout),
            429 | 500 | 502 => return Err(ProviderError::Transport(format!("status {status}"))),
            503 => return Err(ProviderError::Unavailable(format!("status {status}"))),
            _ => return Err(ProviderError::BadResponse(format!("status {status}"))),
        }
        let value: Value = resp.body_mut().read_json().map_err(map_error)?;
        extract_content(&value)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| ProviderError::BadResponse("reply has no content".into()))
    }

    /// Send with retry and linear backoff on transient errors.
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let mut attempt = 0;
        loop {
            match self.send_once(prompt) {
                Err(e) if e.is_retryable() && attempt < self.config.retries => {
                    attempt += 1;
                    log::debug!("retrying after {e} (attempt {attempt})");
                    std::thread::sleep(Duration::from_millis(self.config.backoff_ms * attempt as u64));
                }
                other => return other,
            }
        }
    }

    fn ask(&self, name: &str, slots: &[(&str, &str)]) -> Result<String, ProviderError> {
        let prompt = self
            .prompts
            .render(name, slots)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        self.complete(&prompt)
    }
}

impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn evaluator(&self) -> Evaluator {
        Evaluator::Model
    }

    fn classify(&self, raw: &str, at_npc: bool) -> Result<Classification, ProviderError> {
        if raw.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let reply = self.ask("classify", &[("raw", raw), ("at_npc", if at_npc { "yes" } else { "no" })])?;
        let lower = reply.to_lowercase();
        let kind = match (lower.contains("action"), lower.contains("words")) {
            (true, false) => InputKind::Action,
            (false, true) => InputKind::Words,
            _ => return Err(ProviderError::BadResponse(format!("unclear classification `{reply}`"))),
        };
        Ok(Classification { kind, note: reply })
    }

    fn normalize(&self, raw: &str, world: &WorldSpec) -> Result<Normalized, ProviderError> {
        let verbs = supported_verbs().iter().map(|v| v.as_str()).collect::<Vec<_>>().join(", ");
        let locations = world.locations.iter().map(|l| l.name.as_str()).collect::<Vec<_>>().join(", ");
        let objects = world.objects.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(", ");
        let npcs = world.npcs.iter().map(|n| n.name.as_str()).collect::<Vec<_>>().join(", ");
        let reply = self.ask(
            "normalize",
            &[
                ("raw", raw),
                ("verbs", &verbs),
                ("locations", &locations),
                ("objects", &objects),
                ("npcs", &npcs),
            ],
        )?;
        let value = embedded_json(&reply).ok_or_else(|| ProviderError::BadResponse(reply.clone()))?;
        let verb = value
            .get("verb")
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::BadResponse(reply.clone()))?
            .trim()
            .to_lowercase();
        let object = value
            .get("object")
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|o| !o.is_empty());
        Ok(match verb.parse::<Verb>() {
            Ok(v) => Normalized::Command(VerbObjectCommand::new(v, object, raw)),
            Err(_) => Normalized::Unrecognized {
                raw: raw.to_string(),
                verb,
                object: object.map(str::to_string),
            },
        })
    }

    fn npc_respond(&self, ctx: &NpcContext, utterance: &str, history: &HistoryWindow) -> Result<String, ProviderError> {
        let clues = ctx.clues.join(" ");
        let summary = ctx.history_summary.clone().or_else(|| history.summary.clone()).unwrap_or_default();
        self.ask(
            "npc",
            &[
                ("name", &ctx.name),
                ("persona", &ctx.persona),
                ("backstory", &ctx.backstory),
                ("location", &ctx.location_title),
                ("goal", ctx.goal_prompt.as_deref().unwrap_or("none; chat freely")),
                ("unmet", ctx.unmet_condition.as_deref().unwrap_or("nothing")),
                ("clues", &clues),
                ("event", &describe_event(&ctx.event)),
                ("summary", &summary),
                ("window", &render_window(ctx)),
                ("utterance", utterance),
            ],
        )
    }

    fn game_feedback(
        &self,
        raw: &str,
        world: &WorldSpec,
        state: &WorldState,
        history: &HistoryWindow,
    ) -> Result<String, ProviderError> {
        let here = world
            .location(&state.current_location)
            .map(|l| format!("{}: {}", l.title, l.description))
            .unwrap_or_default();
        let objects = state
            .objects_at(world, &state.current_location)
            .iter()
            .map(|o| o.name.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        self.ask(
            "feedback",
            &[
                ("raw", raw),
                ("location", &here),
                ("objects", &objects),
                ("summary", history.summary.as_deref().unwrap_or("")),
            ],
        )
    }

    fn rewrite_failure(
        &self,
        raw: &str,
        failure: &ActionResult,
        npc: Option<&NpcContext>,
        _history: &HistoryWindow,
    ) -> Result<String, ProviderError> {
        let code = failure
            .failure_code
            .map(|c| format!("{c:?}"))
            .unwrap_or_default();
        let witness = npc.map(|n| format!("{} ({})", n.name, n.persona)).unwrap_or_else(|| "none".into());
        self.ask(
            "rewrite",
            &[("raw", raw), ("message", &failure.message), ("code", &code), ("witness", &witness)],
        )
    }

    fn summarize(&self, turns: &[Turn], max_tokens: usize) -> Result<String, ProviderError> {
        let transcript = turns.iter().map(Turn::render).collect::<Vec<_>>().join("\n");
        self.ask(
            "summarize",
            &[("max_tokens", &max_tokens.to_string()), ("transcript", &transcript)],
        )
    }

    fn judge(&self, condition: &UtteranceCondition, utterance: &str) -> Result<bool, ProviderError> {
        yes_no(&self.ask("judge", &[("instruction", &condition.instruction), ("utterance", utterance)])?)
    }

    fn distill(&self, day: &[LogRecord], _world: &WorldSpec) -> Result<Vec<StrategySpan>, ProviderError> {
        let log = day
            .iter()
            .map(|r| format!("{} | {} | {}", r.seq, r.role, r.text))
            .collect::<Vec<_>>()
            .join("\n");
        let reply = self.ask("distill", &[("log", &log)])?;
        let value = embedded_json(&reply).ok_or_else(|| ProviderError::BadResponse(reply.clone()))?;
        serde_json::from_value(value).map_err(|e| ProviderError::BadResponse(e.to_string()))
    }

    fn match_summaries(&self, a: &str, b: &str) -> Result<bool, ProviderError> {
        yes_no(&self.ask("match", &[("a", a), ("b", b)])?)
    }

    fn categorize(&self, summary: &str) -> Result<Category, ProviderError> {
        let reply = self.ask("categorize", &[("summary", summary)])?;
        let word = reply.split_whitespace().next().unwrap_or("").trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
        word.parse().map_err(ProviderError::BadResponse)
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    use super::*;

    /// Serve one canned reply per connection, in order, and return the
    /// request bodies seen.
    fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/chat", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream);
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let _ = tx.send(String::from_utf8(buf).unwrap());
                let resp = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                reader.get_mut().write_all(resp.as_bytes()).unwrap();
            }
        });
        (url, rx)
    }

    fn provider(url: String) -> RemoteProvider {
        let mut cfg = RemoteConfig::new(url, "test-model");
        cfg.backoff_ms = 1;
        cfg.api_key = Some("secret".into());
        RemoteProvider::new(cfg)
    }

    #[test]
    fn classify_round_trip() {
        let (url, rx) = serve(vec![(200, r#"{"content": "words"}"#.into())]);
        let p = provider(url);
        assert_eq!(p.classify("hello there", true).unwrap().kind, InputKind::Words);
        let sent: Value = serde_json::from_str(&rx.recv().unwrap()).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert!(sent["messages"][0]["content"].as_str().unwrap().contains("hello there"));
    }

    #[test]
    fn retries_once_then_succeeds() {
        let (url, _rx) = serve(vec![
            (500, "{}".into()),
            (200, r#"{"choices": [{"message": {"content": "Yes."}}]}"#.into()),
        ]);
        assert!(provider(url).match_summaries("a", "b").unwrap());
    }

    #[test]
    fn unavailable_and_garbage_are_typed() {
        let (url, _rx) = serve(vec![(503, "{}".into())]);
        assert!(matches!(provider(url).match_summaries("a", "b"), Err(ProviderError::Unavailable(_))));
        let (url, _rx) = serve(vec![(200, r#"{"content": "maybe"}"#.into())]);
        assert!(matches!(provider(url).match_summaries("a", "b"), Err(ProviderError::BadResponse(_))));
    }

    #[test]
    fn normalize_parses_fenced_json() {
        let reply = json!({"content": "```json\n{\"verb\": \"take\", \"object\": \"torch\"}\n```"}).to_string();
        let (url, _rx) = serve(vec![(200, reply)]);
        let got = provider(url).normalize("grab the torch", &crate::world::dejaboom()).unwrap();
        assert_eq!(got, Normalized::Command(VerbObjectCommand::new(Verb::Take, Some("torch"), "grab the torch")));
    }

    #[test]
    fn connection_refused_is_transport() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/chat", listener.local_addr().unwrap());
        drop(listener);
        let mut cfg = RemoteConfig::new(url, "m");
        cfg.retries = 0;
        let err = RemoteProvider::new(cfg).match_summaries("a", "b").unwrap_err();
        assert!(err.is_retryable(), "{err:?}");
    }
}
