//! Declarative world specification and the mutable per-session world state.
//!
//! A [`WorldSpec`] is loaded from JSON and validated once; afterwards it is
//! immutable and can be shared freely. [`WorldState`] is owned by a single
//! session and is rebuilt from the spec at every day reset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::npc::{self, NpcRuntime, NpcSpec};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl PartialEq<str> for $name {
            fn eq(&self, other: &str) -> bool {
                self.0 == other
            }
        }

        impl PartialEq<&str> for $name {
            fn eq(&self, other: &&str) -> bool {
                self.0 == *other
            }
        }
    };
}

string_id!(LocationId);
string_id!(ObjectId);
string_id!(NpcId);
string_id!(
    /// Identifier of a milestone flag; position in [`WorldSpec::milestones`]
    /// fixes its bit in the [`StateLabel`].
    FlagId
);

/// Placement keyword for objects that start in the player's hands.
pub const INVENTORY: &str = "inventory";

/// The reference world, bundled with the crate.
pub const DEJABOOM_WORLD: &str = include_str!("../assets/worlds/dejaboom.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Main,
    Street,
    Secret,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: LocationId,
    pub name: String,
    /// How prose refers to the place ("the park", "your home").
    pub title: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    pub kind: LocationKind,
    pub description: String,
    pub exits: BTreeMap<String, LocationId>,
    /// Directions in `exits` that have no matching way back.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub one_way: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub hidden: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal_condition: Option<FlagId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameObject {
    pub id: ObjectId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    /// A location id, or [`INVENTORY`].
    pub location: String,
    pub portable: bool,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readable_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_text: Option<String>,
    /// Flags granted when the object is read (readable objects) or picked up.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grants: Vec<FlagId>,
}

impl GameObject {
    pub fn is_readable(&self) -> bool {
        self.readable_text.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bomb {
    pub location: LocationId,
    pub step_limit: u32,
    pub defuse_requirement: Vec<FlagId>,
    pub description: String,
    pub defused_text: String,
    pub explosion_text: String,
}

/// Ingredients and know-how needed to assemble the disposal kit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KitRecipe {
    pub ingredients: Vec<ObjectId>,
    pub requires: Vec<FlagId>,
    pub grants: Vec<FlagId>,
    pub success_text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub title: String,
    pub intro_text: String,
    pub start_location: LocationId,
    pub milestones: Vec<FlagId>,
    pub locations: Vec<Location>,
    pub objects: Vec<GameObject>,
    pub npcs: Vec<NpcSpec>,
    pub bomb: Bomb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kit: Option<KitRecipe>,
}

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid world spec: {0}")]
    Invalid(#[from] ValidationError),
    #[error("unknown milestone flag `{0}`")]
    UnknownFlag(FlagId),
}

/// A violated world-spec invariant. [`ValidationError::invariant`] gives a
/// stable machine-readable name for each variant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("duplicate location id `{0}`")]
    DuplicateLocation(LocationId),
    #[error("duplicate object id `{0}`")]
    DuplicateObject(ObjectId),
    #[error("duplicate npc id `{0}`")]
    DuplicateNpc(NpcId),
    #[error("duplicate milestone `{0}`")]
    DuplicateMilestone(FlagId),
    #[error("exit `{direction}` of `{from}` leads to unknown location `{to}`")]
    UnknownExitTarget {
        from: LocationId,
        direction: String,
        to: LocationId,
    },
    #[error("exit `{direction}` of `{from}` to `{to}` has no way back and is not marked one-way")]
    AsymmetricExit {
        from: LocationId,
        direction: String,
        to: LocationId,
    },
    #[error("`{0}` is hidden but has no reveal condition")]
    HiddenWithoutReveal(LocationId),
    #[error("`{owner}` refers to unknown location `{location}`")]
    UnknownPlacement { owner: String, location: String },
    #[error("`{owner}` refers to unknown milestone `{flag}`")]
    UnknownFlag { owner: String, flag: FlagId },
    #[error("`{owner}` refers to unknown object `{object}`")]
    UnknownObject { owner: String, object: ObjectId },
    #[error("non-portable object `{0}` starts in the inventory")]
    FixedObjectInInventory(ObjectId),
    #[error("start location `{0}` does not exist")]
    UnknownStart(LocationId),
    #[error("bomb step limit must be at least 1")]
    ZeroStepLimit,
    #[error("npc `{0}` has no goals")]
    NpcWithoutGoals(NpcId),
}

impl ValidationError {
    pub fn invariant(&self) -> &'static str {
        match self {
            Self::DuplicateLocation(_) => "location_ids_unique",
            Self::DuplicateObject(_) => "object_ids_unique",
            Self::DuplicateNpc(_) => "npc_ids_unique",
            Self::DuplicateMilestone(_) => "milestone_ids_unique",
            Self::UnknownExitTarget { .. } => "exit_targets_exist",
            Self::AsymmetricExit { .. } => "exits_symmetric",
            Self::HiddenWithoutReveal(_) => "hidden_has_reveal_condition",
            Self::UnknownPlacement { .. } => "placements_exist",
            Self::UnknownFlag { .. } => "flags_exist",
            Self::UnknownObject { .. } => "objects_exist",
            Self::FixedObjectInInventory(_) => "fixed_objects_not_in_inventory",
            Self::UnknownStart(_) => "start_location_exists",
            Self::ZeroStepLimit => "step_limit_positive",
            Self::NpcWithoutGoals(_) => "npc_goals_non_empty",
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Parse and validate a world-spec JSON document.
pub fn load_world_spec(document: &str) -> Result<WorldSpec, WorldError> {
    let spec: WorldSpec = serde_json::from_str(document).map_err(|e| WorldError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

/// The bundled reference world.
pub fn dejaboom() -> WorldSpec {
    load_world_spec(DEJABOOM_WORLD).expect("bundled world spec is valid")
}

impl WorldSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world spec serializes")
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut seen = BTreeSet::new();
        for loc in &self.locations {
            if !seen.insert(&loc.id) {
                return Err(ValidationError::DuplicateLocation(loc.id.clone()));
            }
        }
        let mut flags = BTreeSet::new();
        for flag in &self.milestones {
            if !flags.insert(flag) {
                return Err(ValidationError::DuplicateMilestone(flag.clone()));
            }
        }
        let check_flag = |owner: &str, flag: &FlagId| {
            if flags.contains(flag) {
                Ok(())
            } else {
                Err(ValidationError::UnknownFlag {
                    owner: owner.to_string(),
                    flag: flag.clone(),
                })
            }
        };

        for loc in &self.locations {
            for (direction, to) in &loc.exits {
                let Some(target) = self.location(to) else {
                    return Err(ValidationError::UnknownExitTarget {
                        from: loc.id.clone(),
                        direction: direction.clone(),
                        to: to.clone(),
                    });
                };
                if !loc.one_way.contains(direction) && !target.exits.values().any(|back| back == &loc.id) {
                    return Err(ValidationError::AsymmetricExit {
                        from: loc.id.clone(),
                        direction: direction.clone(),
                        to: to.clone(),
                    });
                }
            }
            match (&loc.hidden, &loc.reveal_condition) {
                (true, None) => return Err(ValidationError::HiddenWithoutReveal(loc.id.clone())),
                (_, Some(flag)) => check_flag(loc.id.as_str(), flag)?,
                _ => {}
            }
        }

        let mut objects = BTreeSet::new();
        for obj in &self.objects {
            if !objects.insert(&obj.id) {
                return Err(ValidationError::DuplicateObject(obj.id.clone()));
            }
            if obj.location == INVENTORY {
                if !obj.portable {
                    return Err(ValidationError::FixedObjectInInventory(obj.id.clone()));
                }
            } else if self.location(&LocationId::new(obj.location.clone())).is_none() {
                return Err(ValidationError::UnknownPlacement {
                    owner: obj.id.to_string(),
                    location: obj.location.clone(),
                });
            }
            for flag in &obj.grants {
                check_flag(obj.id.as_str(), flag)?;
            }
        }

        let mut npcs = BTreeSet::new();
        for spec in &self.npcs {
            if !npcs.insert(&spec.id) {
                return Err(ValidationError::DuplicateNpc(spec.id.clone()));
            }
            if self.location(&spec.location).is_none() {
                return Err(ValidationError::UnknownPlacement {
                    owner: spec.id.to_string(),
                    location: spec.location.to_string(),
                });
            }
            if spec.goals.is_empty() {
                return Err(ValidationError::NpcWithoutGoals(spec.id.clone()));
            }
            for flag in npc::referenced_flags(spec) {
                check_flag(spec.id.as_str(), flag)?;
            }
        }

        if self.location(&self.start_location).is_none() {
            return Err(ValidationError::UnknownStart(self.start_location.clone()));
        }
        if self.bomb.step_limit == 0 {
            return Err(ValidationError::ZeroStepLimit);
        }
        if self.location(&self.bomb.location).is_none() {
            return Err(ValidationError::UnknownPlacement {
                owner: "bomb".into(),
                location: self.bomb.location.to_string(),
            });
        }
        for flag in &self.bomb.defuse_requirement {
            check_flag("bomb", flag)?;
        }
        if let Some(kit) = &self.kit {
            for item in &kit.ingredients {
                if self.object(item).is_none() {
                    return Err(ValidationError::UnknownObject {
                        owner: "kit".into(),
                        object: item.clone(),
                    });
                }
            }
            for flag in kit.requires.iter().chain(&kit.grants) {
                check_flag("kit", flag)?;
            }
        }
        Ok(())
    }

    pub fn location(&self, id: &LocationId) -> Option<&Location> {
        self.locations.iter().find(|l| &l.id == id)
    }

    pub fn object(&self, id: &ObjectId) -> Option<&GameObject> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn npc(&self, id: &NpcId) -> Option<&NpcSpec> {
        self.npcs.iter().find(|n| &n.id == id)
    }

    pub fn flag_index(&self, flag: &FlagId) -> Option<usize> {
        self.milestones.iter().position(|f| f == flag)
    }

    /// Find a location by id, name or alias (case-insensitive).
    pub fn find_location(&self, token: &str) -> Option<&Location> {
        let token = token.trim().to_lowercase();
        self.locations.iter().find(|l| {
            l.id.as_str() == token
                || l.name.to_lowercase() == token
                || l.title.to_lowercase() == token
                || l.aliases.iter().any(|a| a.to_lowercase() == token)
        })
    }

    /// Find an object by id, name or alias (case-insensitive).
    pub fn find_object(&self, token: &str) -> Option<&GameObject> {
        let token = token.trim().to_lowercase();
        self.objects.iter().find(|o| {
            o.id.as_str() == token || o.name.to_lowercase() == token || o.aliases.iter().any(|a| a.to_lowercase() == token)
        })
    }

    /// Find an NPC by id, full name, or any single word of the name longer
    /// than three letters ("hatter", "thompson").
    pub fn find_npc(&self, token: &str) -> Option<&NpcSpec> {
        let token = token.trim().to_lowercase();
        self.npcs.iter().find(|n| {
            let name = n.name.to_lowercase();
            n.id.as_str() == token
                || name == token
                || name
                    .split(|c: char| !c.is_alphanumeric())
                    .any(|w| w.len() > 3 && w == token)
        })
    }

    pub fn is_revealed(&self, loc: &Location, state: &WorldState) -> bool {
        !loc.hidden
            || loc
                .reveal_condition
                .as_ref()
                .is_some_and(|flag| state.has_flag(self, flag))
    }

    /// Exits of `from` that the player can currently see, in direction order.
    /// Hidden rooms show up only once their reveal flag is set.
    pub fn visible_exits<'a>(&'a self, from: &LocationId, state: &WorldState) -> Vec<(&'a str, &'a Location)> {
        let Some(loc) = self.location(from) else {
            return Vec::new();
        };
        loc.exits
            .iter()
            .filter_map(|(dir, to)| self.location(to).map(|l| (dir.as_str(), l)))
            .filter(|(_, l)| self.is_revealed(l, state))
            .collect()
    }
}

/// Where an object currently is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "location", rename_all = "snake_case")]
pub enum Placement {
    At(LocationId),
    Inventory,
    /// Used up (kit ingredients after crafting). Only a reset brings it back.
    Consumed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub current_location: LocationId,
    pub placements: BTreeMap<ObjectId, Placement>,
    pub flags: Vec<bool>,
    pub npcs: BTreeMap<NpcId, NpcRuntime>,
    pub step_in_day: u32,
    pub day: u32,
}

impl WorldState {
    /// Day-one state with every object, flag and NPC at its spec default.
    pub fn fresh(spec: &WorldSpec) -> Self {
        let placements = spec
            .objects
            .iter()
            .map(|o| {
                let placement = if o.location == INVENTORY {
                    Placement::Inventory
                } else {
                    Placement::At(LocationId::new(o.location.clone()))
                };
                (o.id.clone(), placement)
            })
            .collect();
        let mut state = Self {
            current_location: spec.start_location.clone(),
            placements,
            flags: vec![false; spec.milestones.len()],
            npcs: spec.npcs.iter().map(|n| (n.id.clone(), NpcRuntime::new(n.id.clone()))).collect(),
            step_in_day: 0,
            day: 1,
        };
        state.refresh_activation(spec);
        state
    }

    /// Restore every spec default and start the next day. The session log is
    /// not part of the world state and is left alone.
    pub fn reset(&self, spec: &WorldSpec) -> Self {
        let mut next = Self::fresh(spec);
        next.day = self.day + 1;
        next
    }

    pub fn label(&self, spec: &WorldSpec) -> StateLabel {
        let mut bits = self.flags.clone();
        bits.resize(spec.milestones.len(), false);
        StateLabel(bits)
    }

    pub fn has_flag(&self, spec: &WorldSpec, flag: &FlagId) -> bool {
        spec.flag_index(flag)
            .and_then(|i| self.flags.get(i).copied())
            .unwrap_or(false)
    }

    /// Set a milestone flag. Idempotent; other flags are never touched.
    /// Returns whether the flag was newly set.
    pub fn set_flag(&mut self, spec: &WorldSpec, flag: &FlagId) -> Result<bool, WorldError> {
        let idx = spec.flag_index(flag).ok_or_else(|| WorldError::UnknownFlag(flag.clone()))?;
        if self.flags.len() < spec.milestones.len() {
            self.flags.resize(spec.milestones.len(), false);
        }
        let newly = !self.flags[idx];
        self.flags[idx] = true;
        if newly {
            self.refresh_activation(spec);
        }
        Ok(newly)
    }

    fn refresh_activation(&mut self, spec: &WorldSpec) {
        for npc in &spec.npcs {
            let active = npc.activation.as_ref().is_none_or(|f| self.has_flag(spec, f));
            if let Some(rt) = self.npcs.get_mut(&npc.id) {
                rt.activated = active;
            }
        }
    }

    pub fn placement(&self, id: &ObjectId) -> Option<&Placement> {
        self.placements.get(id)
    }

    pub fn inventory(&self) -> BTreeSet<&ObjectId> {
        self.placements
            .iter()
            .filter(|(_, p)| **p == Placement::Inventory)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn in_inventory(&self, id: &ObjectId) -> bool {
        self.placements.get(id) == Some(&Placement::Inventory)
    }

    /// Objects lying at `loc`, in spec order.
    pub fn objects_at<'a>(&self, spec: &'a WorldSpec, loc: &LocationId) -> Vec<&'a GameObject> {
        spec.objects
            .iter()
            .filter(|o| matches!(self.placements.get(&o.id), Some(Placement::At(l)) if l == loc))
            .collect()
    }
}

/// Convenience wrappers mirroring the functional operations.
pub fn reset_world(state: &WorldState, spec: &WorldSpec) -> WorldState {
    state.reset(spec)
}

pub fn state_label(state: &WorldState, spec: &WorldSpec) -> StateLabel {
    state.label(spec)
}

pub fn set_flag(state: &WorldState, spec: &WorldSpec, flag: &FlagId) -> Result<WorldState, WorldError> {
    let mut next = state.clone();
    next.set_flag(spec, flag)?;
    Ok(next)
}

/// Milestone-flag fingerprint of a world state, one bit per milestone in
/// spec order. Serialized as a string of `0`/`1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateLabel(pub Vec<bool>);

impl StateLabel {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0.get(i).copied().unwrap_or(false)
    }

    /// True when every bit set in `other` is also set in `self`.
    pub fn dominates(&self, other: &StateLabel) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| *a || !*b)
    }

    /// Names of the set bits, given the milestone order.
    pub fn set_flags<'a>(&self, milestones: &'a [FlagId]) -> Vec<&'a FlagId> {
        milestones
            .iter()
            .enumerate()
            .filter(|(i, _)| self.bit(*i))
            .map(|(_, f)| f)
            .collect()
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("state label must contain only 0 and 1, got `{0}`")]
pub struct LabelParseError(String);

impl FromStr for StateLabel {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(LabelParseError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(StateLabel)
    }
}

impl Serialize for StateLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StateLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flag(s: &str) -> FlagId {
        FlagId::new(s)
    }

    #[test]
    fn reference_world_has_six_main_places_and_two_secret_rooms() {
        let spec = dejaboom();
        let count = |kind| spec.locations.iter().filter(|l| l.kind == kind).count();
        assert_eq!(count(LocationKind::Main), 6);
        assert_eq!(count(LocationKind::Secret), 2);
        assert_eq!(spec.locations.iter().filter(|l| l.kind != LocationKind::Street).count(), 8);
        assert_eq!(spec.npcs.len(), 5);
        assert_eq!(spec.kit.as_ref().unwrap().ingredients.len(), 3);
        assert_eq!(spec.milestones.len(), 12);
        assert_eq!(spec.bomb.step_limit, 30);
        let bomb_room = spec.location(&spec.bomb.location).unwrap();
        assert!(bomb_room.hidden);
    }

    #[test]
    fn exit_to_unknown_location_is_rejected() {
        let mut spec = dejaboom();
        spec.locations[0].exits.insert("up".into(), LocationId::new("attic"));
        let err = load_world_spec(&spec.to_json()).unwrap_err();
        match err {
            WorldError::Invalid(v) => assert_eq!(v.invariant(), "exit_targets_exist"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimal_world_is_valid() {
        let doc = r#"{
            "title": "tiny", "intro_text": "hi", "start_location": "cell",
            "milestones": [],
            "locations": [{"id": "cell", "name": "cell", "title": "the cell", "kind": "main",
                           "description": "A cell.", "exits": {}}],
            "objects": [], "npcs": [],
            "bomb": {"location": "cell", "step_limit": 1, "defuse_requirement": [],
                     "description": "b", "defused_text": "d", "explosion_text": "e"}
        }"#;
        let spec = load_world_spec(doc).unwrap();
        assert_eq!(spec.locations.len(), 1);
        assert_eq!(spec.bomb.step_limit, 1);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = load_world_spec("{\n  \"title\": 3,\n}").unwrap_err();
        assert!(matches!(err, WorldError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn asymmetric_exit_needs_one_way_marker() {
        let mut spec = dejaboom();
        let park = spec.locations.iter_mut().find(|l| l.id == "park").unwrap();
        park.exits.clear();
        assert_eq!(spec.validate().unwrap_err().invariant(), "exits_symmetric");
        let street = spec.locations.iter_mut().find(|l| l.id == "residential_street").unwrap();
        street.one_way.insert("north".into());
        spec.validate().unwrap();
    }

    #[test]
    fn hidden_room_requires_reveal_condition() {
        let mut spec = dejaboom();
        let lab = spec.locations.iter_mut().find(|l| l.id == "secret_lab").unwrap();
        lab.reveal_condition = None;
        assert_eq!(spec.validate().unwrap_err().invariant(), "hidden_has_reveal_condition");
    }

    #[test]
    fn fresh_label_is_all_zero() {
        let spec = dejaboom();
        let state = WorldState::fresh(&spec);
        assert_eq!(state.label(&spec).to_string(), "000000000000");
        assert_eq!(state.day, 1);
    }

    #[test]
    fn label_projects_exactly_the_set_flags() {
        let spec = dejaboom();
        let mut state = WorldState::fresh(&spec);
        state.set_flag(&spec, &flag("talked_thompson")).unwrap();
        state.set_flag(&spec, &flag("hatter_active")).unwrap();
        let label = state.label(&spec);
        assert_eq!(label.to_string(), "110000000000");
        assert_eq!(
            label.set_flags(&spec.milestones),
            vec![&flag("talked_thompson"), &flag("hatter_active")]
        );
    }

    #[test]
    fn set_flag_is_idempotent_and_rejects_unknown_ids() {
        let spec = dejaboom();
        let fresh = WorldState::fresh(&spec);
        let once = set_flag(&fresh, &spec, &flag("read_recipe")).unwrap();
        let twice = set_flag(&once, &spec, &flag("read_recipe")).unwrap();
        assert_eq!(once, twice);
        assert!(matches!(
            set_flag(&fresh, &spec, &flag("ate_cake")),
            Err(WorldError::UnknownFlag(_))
        ));
    }

    #[test]
    fn bomb_located_reveals_the_storage_room() {
        let spec = dejaboom();
        let mut state = WorldState::fresh(&spec);
        let smithy = LocationId::new("blacksmith");
        let shows_storage = |s: &WorldState| spec.visible_exits(&smithy, s).iter().any(|(_, l)| l.id == "storage_room");
        assert!(!shows_storage(&state));
        state.set_flag(&spec, &flag("bomb_located")).unwrap();
        assert!(shows_storage(&state));
    }

    #[test]
    fn reset_restores_defaults_and_bumps_day() {
        let spec = dejaboom();
        let fresh = WorldState::fresh(&spec);
        let reset = reset_world(&fresh, &spec);
        assert_eq!(reset.day, 2);
        assert_eq!(reset.placements, fresh.placements);

        let mut played = fresh.clone();
        played.set_flag(&spec, &flag("talked_thompson")).unwrap();
        assert!(played.npcs[&NpcId::new("mad_hatter")].activated);
        played
            .placements
            .insert(ObjectId::new("water_bucket"), Placement::Inventory);
        let reset = played.reset(&spec);
        assert_eq!(
            reset.placement(&ObjectId::new("water_bucket")),
            Some(&Placement::At(LocationId::new("home")))
        );
        assert!(!reset.npcs[&NpcId::new("mad_hatter")].activated);
    }

    #[test]
    fn label_dominance() {
        let a: StateLabel = "1100".parse().unwrap();
        let b: StateLabel = "1000".parse().unwrap();
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
        assert!(a.dominates(&a));
        assert!("10x".parse::<StateLabel>().is_err());
    }
}
