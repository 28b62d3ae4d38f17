//! Narrative graphs built from game logs: distill each day into strategies,
//! chain them into path graphs, merge paths on equal state labels and
//! matching summaries, and find the strategies designers never played.

mod distill;
mod emergence;
mod export;
mod graph;
mod merge;

use serde::{Deserialize, Serialize};

pub use distill::{distill_day, rule_distill, DistillError, PhrasePattern, PhraseTable, Strategy};
pub use emergence::{
    analyze, categorize, find_emergent, Analysis, EmergenceReport, EmergentNode, PlayerEmergence, PlayerLogs,
};
pub use export::{from_json, to_dot, to_json, ImportError};
pub use graph::{
    build_designer_graph, build_path_graph, build_player_graph, GraphError, NarrativeGraph, NodeId, Provenance,
    SourceKind, StrategyNode,
};
pub use merge::{merge, MergeError, MergeOutcome, NodeMatch, SummaryMatcher, Verdict};

/// Emergent-strategy categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    ExtractingInformationFromNpcs,
    NewEntitySuggestions,
    CreativeHiddenInformation,
    NewDefuseMethods,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::ExtractingInformationFromNpcs,
        Category::NewEntitySuggestions,
        Category::CreativeHiddenInformation,
        Category::NewDefuseMethods,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ExtractingInformationFromNpcs => "extracting-information-from-npcs",
            Category::NewEntitySuggestions => "new-entity-suggestions",
            Category::CreativeHiddenInformation => "creative-hidden-information",
            Category::NewDefuseMethods => "new-defuse-methods",
            Category::Other => "other",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// One strategy as returned by a distiller: its summary and the seq of the
/// last log record it covers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpan {
    pub summary: String,
    pub last_seq: u64,
}
