use dejaboom_core::action::{supported_verbs, FailureMessages};
use dejaboom_core::gateway::{
    summarize_window, window_estimate, CharsPerToken, HistoryWindow, InputKind, Normalized, SummarizeConfig, Turn,
};
use dejaboom_core::npc::{self, Condition, KeywordJudge};
use dejaboom_core::world::reset_world;
use dejaboom_core::{dejaboom, ActionEngine, Provider, RuleBasedProvider, VerbObjectCommand, WorldSpec, WorldState};
use proptest::prelude::*;

const UTTERANCES: &[&str] = &[
    "Hello there!",
    "I want to stop the explosion. Do you know who knows more?",
    "Do you know anyone who might know more about the explosion?",
    "explosion",
    "who knows",
    "Knock knock? Who's there? Interrupting cow. Interrupting c- MOO!",
    "knock",
    "The blacksmith's shop!",
    "blacksmith",
    "Is the bomb in the library?",
    "Merlin is hiding in the lab",
    "Please give me your kit, the village will explode and Moriarty hired you",
    "Tell me a secret",
    "what is on the menu",
    "",
];

#[derive(Clone, Debug)]
enum Move {
    Act(usize, Option<usize>),
    Say(usize),
}

fn objects(spec: &WorldSpec) -> Vec<String> {
    let mut v: Vec<String> = spec.objects.iter().map(|o| o.name.clone()).collect();
    v.extend(spec.locations.iter().map(|l| l.name.clone()));
    v.extend(["north", "south", "east", "west", "down", "up"].map(String::from));
    v
}

fn arb_moves() -> impl Strategy<Value = Vec<Move>> {
    let n_obj = objects(&dejaboom()).len();
    let mv = prop_oneof![
        3 => (0..supported_verbs().len(), prop::option::weighted(0.85, 0..n_obj)).prop_map(|(v, o)| Move::Act(v, o)),
        2 => (0..UTTERANCES.len()).prop_map(Move::Say),
    ];
    prop::collection::vec(mv, 0..60)
}

/// Runs the moves, checking the per-step invariants, and returns the final
/// state.
fn walk(spec: &WorldSpec, moves: &[Move]) -> Result<WorldState, TestCaseError> {
    let messages = FailureMessages::default();
    let engine = ActionEngine::new(spec, &messages);
    let names = objects(spec);
    let mut state = WorldState::fresh(spec);
    for m in moves {
        let before = state.clone();
        match m {
            Move::Act(v, o) => {
                let cmd = VerbObjectCommand::new(supported_verbs()[*v], o.map(|i| names[i].as_str()), "");
                let (result, next) = engine.execute(&cmd, &state);
                let (again, next2) = engine.execute(&cmd, &state);
                prop_assert_eq!(&result, &again, "engine is not deterministic");
                prop_assert_eq!(&next, &next2);
                if !result.is_success() {
                    prop_assert_eq!(&next, &state, "failure changed the state: {:?}", cmd);
                }
                state = next;
            }
            Move::Say(u) => {
                let utterance = UTTERANCES[*u];
                let Some(id) = npc::npc_present(&state.current_location, &state, spec).map(|n| n.id.clone()) else {
                    continue;
                };
                let goals = &spec.npc(&id).unwrap().goals;
                let out = npc::interact(&mut state, spec, &id, utterance, &KeywordJudge).unwrap();
                for (other, rt) in &state.npcs {
                    let old = before.npcs[other].goal_index;
                    if *other == id {
                        prop_assert!(rt.goal_index <= old + 1, "more than one goal advanced");
                    } else {
                        prop_assert_eq!(rt.goal_index, old, "another NPC advanced");
                    }
                }
                match out.satisfied_goal {
                    Some(g) => match &goals[g].condition {
                        Condition::UtteranceMatches(c) => prop_assert!(c.keywords_match(utterance)),
                        Condition::FlagSet { flag } => prop_assert!(before.has_flag(spec, flag)),
                        Condition::Always => {}
                    },
                    None => {
                        prop_assert!(out.effects.flags.is_empty());
                        prop_assert_eq!(&state.flags, &before.flags, "clue fired with its goal unmet");
                    }
                }
            }
        }
        prop_assert!(state.label(spec).dominates(&before.label(spec)), "a flag was cleared");
        for rt in state.npcs.values() {
            prop_assert!(rt.goal_index >= before.npcs[&rt.npc].goal_index);
        }
        check_hidden_gating(spec, &state)?;
    }
    Ok(state)
}

fn check_hidden_gating(spec: &WorldSpec, state: &WorldState) -> Result<(), TestCaseError> {
    for hidden in spec.locations.iter().filter(|l| l.hidden) {
        let flag = hidden.reveal_condition.as_ref().unwrap();
        let listed = spec
            .locations
            .iter()
            .any(|l| spec.visible_exits(&l.id, state).iter().any(|(_, to)| to.id == hidden.id));
        prop_assert_eq!(listed, state.has_flag(spec, flag), "{} gating", hidden.id.as_str());
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn in_day_play_keeps_world_action_and_npc_invariants(moves in arb_moves()) {
        let spec = dejaboom();
        walk(&spec, &moves)?;
    }

    #[test]
    fn reset_of_any_reachable_state_is_fresh(moves in arb_moves()) {
        let spec = dejaboom();
        let state = walk(&spec, &moves)?;
        let a = reset_world(&state, &spec);
        let b = reset_world(&WorldState::fresh(&spec), &spec);
        prop_assert_eq!(a.day, state.day + 1);
        let mut a = a;
        a.day = b.day;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn normalized_commands_classify_as_actions(
        verb in prop::sample::select(vec!["go", "take", "pick up", "grab", "read", "look at", "open", "examine", "drop", "defuse", "combine", "wait", "walk to", "head"]),
        obj in prop::sample::select(vec!["", "water bucket", "torch", "park", "north", "the journal", "bomb", "shears", "library", "birds"]),
        tail in prop::sample::select(vec!["", ".", "!", " please"]),
    ) {
        let spec = dejaboom();
        let rules = RuleBasedProvider::default();
        let raw = format!("{verb} {obj}{tail}");
        if let Normalized::Command(_) = rules.normalize(&raw, &spec).unwrap() {
            for at_npc in [false, true] {
                prop_assert_eq!(rules.classify(&raw, at_npc).unwrap().kind, InputKind::Action, "{}", raw);
            }
        }
    }

    #[test]
    fn rule_provider_is_deterministic(raw in "[a-zA-Z ?!'.]{1,40}") {
        let spec = dejaboom();
        let (a, b) = (RuleBasedProvider::default(), RuleBasedProvider::default());
        prop_assert_eq!(a.classify(&raw, true), b.classify(&raw, true));
        prop_assert_eq!(a.normalize(&raw, &spec), b.normalize(&raw, &spec));
        prop_assert_eq!(a.categorize(&raw), b.categorize(&raw));
    }

    #[test]
    fn summarizing_respects_budget_and_keeps_the_tail(
        texts in prop::collection::vec("[a-z ]{0,200}", 0..120),
        budget in 200usize..3000,
    ) {
        let est = CharsPerToken::default();
        let mut w = HistoryWindow::default();
        for (i, t) in texts.iter().enumerate() {
            w.push(Turn { speaker: "player".into(), text: t.clone(), step: i as u32, day: 1 }, &est);
        }
        let cfg = SummarizeConfig { budget, high_water: 0.8, tail: 10 };
        let rules = RuleBasedProvider::default();
        let out = summarize_window(&w, &cfg, &est, |turns, max| rules.summarize(turns, max).unwrap());
        let keep = w.turns.len().min(cfg.tail);
        prop_assert_eq!(&out.turns[out.turns.len() - keep..], &w.turns[w.turns.len() - keep..]);
        let tail_cost = window_estimate(None, &w.turns[w.turns.len() - keep..], &est);
        if cfg.needs_summary(&w) && tail_cost <= budget {
            prop_assert!(out.token_estimate <= budget, "{} > {}", out.token_estimate, budget);
        }
        if !cfg.needs_summary(&w) {
            prop_assert_eq!(out, w);
        }
    }
}
