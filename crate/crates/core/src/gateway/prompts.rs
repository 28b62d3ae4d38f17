//! Prompt templates with `{{name}}` placeholders.

use std::collections::BTreeMap;
use std::path::Path;

const BUNDLED: [(&str, &str); 10] = [
    ("classify", include_str!("../../assets/prompts/classify.txt")),
    ("normalize", include_str!("../../assets/prompts/normalize.txt")),
    ("npc", include_str!("../../assets/prompts/npc.txt")),
    ("feedback", include_str!("../../assets/prompts/feedback.txt")),
    ("rewrite", include_str!("../../assets/prompts/rewrite.txt")),
    ("summarize", include_str!("../../assets/prompts/summarize.txt")),
    ("judge", include_str!("../../assets/prompts/judge.txt")),
    ("distill", include_str!("../../assets/prompts/distill.txt")),
    ("match", include_str!("../../assets/prompts/match.txt")),
    ("categorize", include_str!("../../assets/prompts/categorize.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("no prompt named `{0}`")]
    Missing(String),
    #[error("prompt `{prompt}` has no value for `{{{{{slot}}}}}`")]
    Unfilled { prompt: String, slot: String },
    #[error("cannot read prompt override `{path}`: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            templates: BUNDLED.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl PromptSet {
    /// Bundled prompts, with any `<name>.txt` in `dir` replacing its
    /// namesake.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::default();
        for (name, _) in BUNDLED {
            let path = dir.join(format!("{name}.txt"));
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    set.templates.insert(name.to_string(), text);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => {
                    return Err(PromptError::Io {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(set)
    }

    pub fn template(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    /// Fill every placeholder of `name` from `slots`. Values are inserted
    /// verbatim and never re-scanned.
    pub fn render(&self, name: &str, slots: &[(&str, &str)]) -> Result<String, PromptError> {
        let template = self.template(name).ok_or_else(|| PromptError::Missing(name.to_string()))?;
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else {
                out.push_str(&rest[start..]);
                rest = "";
                break;
            };
            let slot = after[..end].trim();
            let value = slots
                .iter()
                .find(|(k, _)| *k == slot)
                .map(|(_, v)| *v)
                .ok_or_else(|| PromptError::Unfilled {
                    prompt: name.to_string(),
                    slot: slot.to_string(),
                })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out.trim_end().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_reports_missing_slots() {
        let p = PromptSet::default();
        let text = p.render("match", &[("a", "x {{b}}"), ("b", "y")]).unwrap();
        assert!(text.contains("A: x {{b}}"));
        assert!(text.contains("B: y"));
        assert_eq!(
            p.render("match", &[("a", "x")]),
            Err(PromptError::Unfilled {
                prompt: "match".into(),
                slot: "b".into()
            })
        );
        assert!(matches!(p.render("nope", &[]), Err(PromptError::Missing(_))));
    }

    #[test]
    fn overrides_replace_bundled_text() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("judge.txt"), "J {{instruction}} {{utterance}}").unwrap();
        let p = PromptSet::with_overrides(dir.path()).unwrap();
        assert_eq!(p.render("judge", &[("instruction", "i"), ("utterance", "u")]).unwrap(), "J i u");
        assert_eq!(p.template("match"), PromptSet::default().template("match"));
    }
}
