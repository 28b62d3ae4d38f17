mod common;

use std::fs;

use dejaboom_core::gateway::InputKind;
use dejaboom_core::{Provider, RuleBasedProvider};
use serde::Deserialize;

#[derive(Deserialize)]
struct Labeled {
    text: String,
    at_npc: bool,
    kind: InputKind,
}

#[test]
fn rule_classifier_labels_every_fixture_command() {
    let path = common::fixtures().join("classifier/commands.json");
    let cases: Vec<Labeled> = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(cases.len(), 40);
    assert_eq!(cases.iter().filter(|c| c.kind == InputKind::Action).count(), 20);
    assert!(cases.iter().any(|c| c.text == "chase the birds"));
    assert!(cases.iter().any(|c| c.text == "can I see your menu"));

    let rules = RuleBasedProvider::default();
    let wrong: Vec<String> = cases
        .iter()
        .filter_map(|c| {
            let got = rules.classify(&c.text, c.at_npc).unwrap();
            (got.kind != c.kind).then(|| format!("{:?}: expected {:?}, got {:?} ({})", c.text, c.kind, got.kind, got.note))
        })
        .collect();
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}
