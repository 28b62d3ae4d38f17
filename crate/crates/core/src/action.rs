//! The fixed game agent: executes canonical verb-object commands against a
//! world state and reports canonical success or failure messages.
//!
//! Natural-language handling lives in the gateway; this module accepts only
//! the verbs in [`supported_verbs`]. Failures never mutate state.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::npc;
use crate::world::{FlagId, GameObject, Location, LocationId, ObjectId, Placement, WorldSpec, WorldState};

pub const DEFAULT_FAILURE_MESSAGES: &str = include_str!("../assets/failure_messages.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Go,
    Take,
    Drop,
    Open,
    Read,
    Examine,
    Look,
    Inventory,
    Combine,
    Defuse,
    Wait,
}

const VERBS: [Verb; 11] = [
    Verb::Go,
    Verb::Take,
    Verb::Drop,
    Verb::Open,
    Verb::Read,
    Verb::Examine,
    Verb::Look,
    Verb::Inventory,
    Verb::Combine,
    Verb::Defuse,
    Verb::Wait,
];

pub fn supported_verbs() -> &'static [Verb] {
    &VERBS
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Go => "go",
            Verb::Take => "take",
            Verb::Drop => "drop",
            Verb::Open => "open",
            Verb::Read => "read",
            Verb::Examine => "examine",
            Verb::Look => "look",
            Verb::Inventory => "inventory",
            Verb::Combine => "combine",
            Verb::Defuse => "defuse",
            Verb::Wait => "wait",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unsupported verb `{0}`")]
pub struct UnknownVerb(pub String);

impl FromStr for Verb {
    type Err = UnknownVerb;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VERBS
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVerb(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbObjectCommand {
    pub verb: Verb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    pub raw: String,
}

impl VerbObjectCommand {
    pub fn new(verb: Verb, object: Option<&str>, raw: impl Into<String>) -> Self {
        Self {
            verb,
            object: object.map(str::to_string),
            raw: raw.into(),
        }
    }

    /// `"take water bucket"`
    pub fn canonical(&self) -> String {
        match &self.object {
            Some(o) => format!("{} {}", self.verb, o),
            None => self.verb.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureCode {
    UnknownVerb,
    MissingObject,
    Precondition,
    NotHere,
    NotPortable,
    Locked,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDelta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moved_to: Option<LocationId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taken: Vec<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub consumed: Vec<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags_set: Vec<FlagId>,
    #[serde(default)]
    pub won: bool,
}

impl StateDelta {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub outcome: Outcome,
    pub message: String,
    pub delta: StateDelta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_code: Option<FailureCode>,
}

impl ActionResult {
    fn success(message: impl Into<String>, delta: StateDelta) -> Self {
        Self {
            outcome: Outcome::Success,
            message: message.into(),
            delta,
            failure_code: None,
        }
    }

    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureMessage {
    pub code: FailureCode,
    pub text: String,
}

/// Canonical failure texts keyed by situation. Templates may use `{verb}`
/// and `{object}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FailureMessages(pub BTreeMap<String, FailureMessage>);

#[derive(Debug, thiserror::Error)]
pub enum FailureTableError {
    #[error("failure table is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failure table is missing key `{0}`")]
    MissingKey(&'static str),
}

const REQUIRED_KEYS: [&str; 16] = [
    "unknown_verb",
    "no_object",
    "missing_object",
    "not_carried",
    "kit_missing_items",
    "not_here",
    "no_exit",
    "defuse_not_here",
    "not_portable",
    "already_have",
    "already_here",
    "cannot_open",
    "not_readable",
    "kit_recipe_unknown",
    "defuse_unready",
    "locked",
];

impl FailureMessages {
    pub fn from_json(doc: &str) -> Result<Self, FailureTableError> {
        let table: Self = serde_json::from_str(doc)?;
        for key in REQUIRED_KEYS {
            if !table.0.contains_key(key) {
                return Err(FailureTableError::MissingKey(key));
            }
        }
        Ok(table)
    }

    pub fn failure(&self, key: &str, verb: &str, object: &str) -> ActionResult {
        let entry = self
            .0
            .get(key)
            .unwrap_or_else(|| panic!("failure table validated at load, missing `{key}`"));
        ActionResult {
            outcome: Outcome::Failure,
            message: entry.text.replace("{verb}", verb).replace("{object}", object),
            delta: StateDelta::default(),
            failure_code: Some(entry.code),
        }
    }
}

impl Default for FailureMessages {
    fn default() -> Self {
        Self::from_json(DEFAULT_FAILURE_MESSAGES).expect("bundled failure table is valid")
    }
}

fn with_article(name: &str) -> String {
    let first = name.chars().next().unwrap_or('x').to_ascii_lowercase();
    if "aeiou".contains(first) {
        format!("an {name}")
    } else {
        format!("a {name}")
    }
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// The text shown on entering or looking around `loc`: description, any
/// NPC present, visible exits, then loose portable objects.
pub fn describe_location(spec: &WorldSpec, state: &WorldState, loc: &Location) -> String {
    let mut parts = vec![loc.description.clone()];
    if let Some(npc) = npc::npc_present(&loc.id, state, spec) {
        parts.push(npc.presence_text.clone());
    }
    let exits: Vec<String> = spec
        .visible_exits(&loc.id, state)
        .into_iter()
        .map(|(dir, to)| format!("{dir} to {}", to.title))
        .collect();
    if !exits.is_empty() {
        parts.push(format!("You can go {}.", join_list(&exits)));
    }
    let loose: Vec<String> = state
        .objects_at(spec, &loc.id)
        .into_iter()
        .filter(|o| o.portable)
        .map(|o| with_article(&o.name))
        .collect();
    if !loose.is_empty() {
        parts.push(format!("There is {}.", join_list(&loose)));
    }
    parts.join(" ")
}

/// Executes commands for one world. Cheap to construct; holds borrows only.
pub struct ActionEngine<'a> {
    spec: &'a WorldSpec,
    messages: &'a FailureMessages,
}

impl<'a> ActionEngine<'a> {
    pub fn new(spec: &'a WorldSpec, messages: &'a FailureMessages) -> Self {
        Self { spec, messages }
    }

    fn fail(&self, key: &str, verb: &str, object: &str) -> ActionResult {
        self.messages.failure(key, verb, object)
    }

    /// Failure result for a verb outside the supported set.
    pub fn unknown_verb(&self, verb: &str) -> ActionResult {
        self.fail("unknown_verb", verb, "")
    }

    /// Run `cmd`. On failure the returned state equals `state`.
    pub fn execute(&self, cmd: &VerbObjectCommand, state: &WorldState) -> (ActionResult, WorldState) {
        let object = cmd.object.as_deref().map(str::trim).filter(|o| !o.is_empty());
        let verb = cmd.verb.as_str();
        let unchanged = |r: ActionResult| (r, state.clone());
        match cmd.verb {
            Verb::Go => match object {
                None => unchanged(self.fail("no_object", verb, "")),
                Some(target) => self.go(target, state),
            },
            Verb::Take => match object {
                None => unchanged(self.fail("no_object", verb, "")),
                Some(o) => self.take(o, state),
            },
            Verb::Drop => match object {
                None => unchanged(self.fail("no_object", verb, "")),
                Some(o) => self.drop(o, state),
            },
            Verb::Open => match object {
                None => unchanged(self.fail("no_object", verb, "")),
                Some(o) => unchanged(self.open(o, state)),
            },
            Verb::Read => match object {
                None => unchanged(self.fail("no_object", verb, "")),
                Some(o) => self.read(o, state),
            },
            Verb::Examine => match object {
                None => unchanged(self.look(state)),
                Some(o) => unchanged(self.examine(o, state)),
            },
            Verb::Look => unchanged(self.look(state)),
            Verb::Inventory => unchanged(self.inventory(state)),
            Verb::Combine => self.combine_kit(state),
            Verb::Defuse => unchanged(self.try_defuse(state)),
            Verb::Wait => unchanged(ActionResult::success("Time passes.", StateDelta::default())),
        }
    }

    fn current(&self, state: &WorldState) -> &'a Location {
        self.spec
            .location(&state.current_location)
            .expect("current location exists in spec")
    }

    fn look(&self, state: &WorldState) -> ActionResult {
        ActionResult::success(describe_location(self.spec, state, self.current(state)), StateDelta::default())
    }

    fn resolve_target(&self, token: &str, state: &WorldState) -> Option<&'a Location> {
        let here = self.current(state);
        let lower = token.to_lowercase();
        if let Some(to) = here.exits.get(&lower) {
            return self.spec.location(to);
        }
        self.spec
            .find_location(token)
            .or_else(|| self.spec.find_npc(token).and_then(|n| self.spec.location(&n.location)))
    }

    fn go(&self, token: &str, state: &WorldState) -> (ActionResult, WorldState) {
        let here = self.current(state);
        let Some(target) = self.resolve_target(token, state) else {
            return (self.fail("missing_object", "go", token), state.clone());
        };
        if target.id == here.id {
            return (self.fail("already_here", "go", &target.name), state.clone());
        }
        let adjacent = here.exits.values().any(|to| to == &target.id);
        let revealed = self.spec.is_revealed(target, state);
        if !adjacent {
            let shown = if revealed { target.title.as_str() } else { token };
            return (self.fail("no_exit", "go", shown), state.clone());
        }
        if !revealed {
            return (self.fail("locked", "go", token), state.clone());
        }
        let mut next = state.clone();
        next.current_location = target.id.clone();
        let delta = StateDelta {
            moved_to: Some(target.id.clone()),
            ..Default::default()
        };
        (ActionResult::success(describe_location(self.spec, &next, target), delta), next)
    }

    /// An object here or in the inventory matching `token`.
    #[allow(clippy::result_large_err)]
    fn reachable(&self, token: &str, state: &WorldState) -> Result<&'a GameObject, ActionResult> {
        let Some(obj) = self.spec.find_object(token) else {
            return Err(self.fail("missing_object", "", token));
        };
        match state.placement(&obj.id) {
            Some(Placement::Inventory) => Ok(obj),
            Some(Placement::At(l)) if l == &state.current_location => Ok(obj),
            _ => Err(self.fail("not_here", "", &obj.name)),
        }
    }

    fn grant(&self, flags: &[FlagId], next: &mut WorldState, delta: &mut StateDelta) {
        for flag in flags {
            if next.set_flag(self.spec, flag).expect("granted flags validated at load") {
                delta.flags_set.push(flag.clone());
            }
        }
    }

    fn take(&self, token: &str, state: &WorldState) -> (ActionResult, WorldState) {
        let obj = match self.reachable(token, state) {
            Ok(o) => o,
            Err(r) => {
                if token.eq_ignore_ascii_case("bomb") && state.current_location == self.spec.bomb.location {
                    return (self.fail("not_portable", "take", "bomb"), state.clone());
                }
                return (r, state.clone());
            }
        };
        if state.in_inventory(&obj.id) {
            return (self.fail("already_have", "take", &obj.name), state.clone());
        }
        if !obj.portable {
            return (self.fail("not_portable", "take", &obj.name), state.clone());
        }
        let mut next = state.clone();
        next.placements.insert(obj.id.clone(), Placement::Inventory);
        let mut delta = StateDelta {
            taken: vec![obj.id.clone()],
            ..Default::default()
        };
        if !obj.is_readable() {
            self.grant(&obj.grants, &mut next, &mut delta);
        }
        (ActionResult::success(format!("You picked up the {}.", obj.name), delta), next)
    }

    fn drop(&self, token: &str, state: &WorldState) -> (ActionResult, WorldState) {
        let carried = self.spec.find_object(token).filter(|o| state.in_inventory(&o.id));
        let Some(obj) = carried else {
            return (self.fail("not_carried", "drop", token), state.clone());
        };
        let mut next = state.clone();
        next.placements
            .insert(obj.id.clone(), Placement::At(state.current_location.clone()));
        let delta = StateDelta {
            dropped: vec![obj.id.clone()],
            ..Default::default()
        };
        (ActionResult::success(format!("You put down the {}.", obj.name), delta), next)
    }

    fn open(&self, token: &str, state: &WorldState) -> ActionResult {
        match self.reachable(token, state) {
            Err(r) => r,
            Ok(obj) => match &obj.open_text {
                Some(text) => ActionResult::success(text.clone(), StateDelta::default()),
                None => self.fail("cannot_open", "open", &obj.name),
            },
        }
    }

    fn read(&self, token: &str, state: &WorldState) -> (ActionResult, WorldState) {
        let obj = match self.reachable(token, state) {
            Ok(o) => o,
            Err(r) => return (r, state.clone()),
        };
        let Some(text) = &obj.readable_text else {
            return (self.fail("not_readable", "read", &obj.name), state.clone());
        };
        let mut next = state.clone();
        let mut delta = StateDelta::default();
        self.grant(&obj.grants, &mut next, &mut delta);
        (ActionResult::success(format!("You read the {}: {}", obj.name, text), delta), next)
    }

    fn examine(&self, token: &str, state: &WorldState) -> ActionResult {
        let lower = token.to_lowercase();
        if (lower == "bomb" || lower == "the bomb") && state.current_location == self.spec.bomb.location {
            return ActionResult::success(self.spec.bomb.description.clone(), StateDelta::default());
        }
        if let Some(npc) = self.spec.find_npc(token) {
            if npc::npc_present(&state.current_location, state, self.spec).is_some_and(|n| n.id == npc.id) {
                return ActionResult::success(npc.presence_text.clone(), StateDelta::default());
            }
        }
        if let Some(loc) = self.spec.find_location(token) {
            if loc.id == state.current_location {
                return self.look(state);
            }
        }
        match self.reachable(token, state) {
            Ok(obj) => ActionResult::success(obj.description.clone(), StateDelta::default()),
            Err(r) => r,
        }
    }

    fn inventory(&self, state: &WorldState) -> ActionResult {
        let names: Vec<String> = self
            .spec
            .objects
            .iter()
            .filter(|o| state.in_inventory(&o.id))
            .map(|o| with_article(&o.name))
            .collect();
        let mut text = if names.is_empty() {
            "You are empty-handed.".to_string()
        } else {
            format!("You are carrying {}.", join_list(&names))
        };
        if let Some(kit) = &self.spec.kit {
            if kit.grants.iter().all(|f| state.has_flag(self.spec, f)) && !kit.grants.is_empty() {
                text.push_str(" You have a bomb disposal kit.");
            }
        }
        ActionResult::success(text, StateDelta::default())
    }

    /// Assemble the disposal kit from carried ingredients once the recipe is
    /// known. The ingredients are consumed.
    pub fn combine_kit(&self, state: &WorldState) -> (ActionResult, WorldState) {
        let Some(kit) = &self.spec.kit else {
            return (self.fail("kit_missing_items", "combine", ""), state.clone());
        };
        if !kit.ingredients.iter().all(|i| state.in_inventory(i)) {
            return (self.fail("kit_missing_items", "combine", ""), state.clone());
        }
        if !kit.requires.iter().all(|f| state.has_flag(self.spec, f)) {
            return (self.fail("kit_recipe_unknown", "combine", ""), state.clone());
        }
        let mut next = state.clone();
        let mut delta = StateDelta::default();
        for item in &kit.ingredients {
            next.placements.insert(item.clone(), Placement::Consumed);
            delta.consumed.push(item.clone());
        }
        self.grant(&kit.grants, &mut next, &mut delta);
        (ActionResult::success(kit.success_text.clone(), delta), next)
    }

    /// Defusal succeeds at the bomb's location once every requirement flag
    /// is set. Success is reported through `delta.won`.
    pub fn try_defuse(&self, state: &WorldState) -> ActionResult {
        let bomb = &self.spec.bomb;
        if state.current_location != bomb.location {
            return self.fail("defuse_not_here", "defuse", "bomb");
        }
        if !bomb.defuse_requirement.iter().all(|f| state.has_flag(self.spec, f)) {
            return self.fail("defuse_unready", "defuse", "bomb");
        }
        ActionResult::success(
            bomb.defused_text.clone(),
            StateDelta {
                won: true,
                ..Default::default()
            },
        )
    }
}
