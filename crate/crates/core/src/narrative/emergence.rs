//! Emergent strategies: nodes a player graph adds to the designer graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::gateway::Provider;
use crate::session::LogRecord;
use crate::world::{StateLabel, WorldSpec};

use super::graph::{build_designer_graph, build_player_graph, GraphError, NarrativeGraph, NodeId, SourceKind};
use super::merge::{merge, MergeError, SummaryMatcher};
use super::Category;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmergentNode {
    pub node: NodeId,
    pub summary: String,
    pub state_label: StateLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    /// Set when the categorizer failed and `category` is a fallback.
    #[serde(default)]
    pub flagged: bool,
    pub players: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerEmergence {
    pub player: String,
    pub count: usize,
    pub summaries: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmergenceReport {
    pub emergent: Vec<EmergentNode>,
    pub per_player: Vec<PlayerEmergence>,
    /// Sum of per-player counts.
    pub total: usize,
    /// Emergent nodes of the graph with every player merged in.
    pub unique: usize,
    /// Counts over the unique emergent nodes.
    pub categories: BTreeMap<Category, usize>,
}

fn emergent_nodes(graph: &NarrativeGraph) -> Vec<EmergentNode> {
    graph
        .emergent()
        .map(|n| EmergentNode {
            node: n.id,
            summary: n.summary.clone(),
            state_label: n.state_label.clone(),
            category: None,
            flagged: false,
            players: n
                .provenance
                .iter()
                .filter(|p| p.kind == SourceKind::Player)
                .map(|p| p.source.clone())
                .collect(),
        })
        .collect()
}

/// Merge one player graph into `g0` and report what it added.
pub fn find_emergent<M: SummaryMatcher + ?Sized>(
    g0: &NarrativeGraph,
    player: &str,
    gi: &NarrativeGraph,
    matcher: &M,
) -> Result<(NarrativeGraph, EmergenceReport), MergeError> {
    let merged = merge(g0, gi, matcher)?.graph;
    let emergent = emergent_nodes(&merged);
    let count = emergent.len();
    let report = EmergenceReport {
        per_player: vec![PlayerEmergence {
            player: player.to_string(),
            count,
            summaries: emergent.iter().map(|e| e.summary.clone()).collect(),
        }],
        total: count,
        unique: count,
        emergent,
        categories: BTreeMap::new(),
    };
    Ok((merged, report))
}

/// Label each summary with a category. A failed call yields
/// [`Category::Other`] with the flag set.
pub fn categorize(summaries: &[&str], provider: &dyn Provider) -> Vec<(Category, bool)> {
    summaries
        .iter()
        .map(|s| match provider.categorize(s) {
            Ok(c) => (c, false),
            Err(e) => {
                log::warn!("categorize failed for `{s}`: {e}");
                (Category::Other, true)
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PlayerLogs {
    pub player_id: String,
    pub log: Vec<LogRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub designer: NarrativeGraph,
    /// The designer graph with every player merged in.
    pub merged: NarrativeGraph,
    pub report: EmergenceReport,
}

/// The full batch pipeline: designer graph, per-player emergence, the
/// all-player merge and categories. Players are merged in the given order.
pub fn analyze(
    walkthroughs: &[(String, Vec<LogRecord>)],
    players: &[PlayerLogs],
    provider: &dyn Provider,
    world: &WorldSpec,
) -> Result<Analysis, GraphError> {
    let g0 = build_designer_graph(walkthroughs, provider, provider, world)?;
    let mut merged = g0.clone();
    let mut per_player = Vec::with_capacity(players.len());
    for p in players {
        let Some(gi) = build_player_graph(&p.player_id, &p.log, provider, provider, world)? else {
            per_player.push(PlayerEmergence {
                player: p.player_id.clone(),
                count: 0,
                summaries: Vec::new(),
            });
            continue;
        };
        let (_, single) = find_emergent(&g0, &p.player_id, &gi, provider)?;
        per_player.extend(single.per_player);
        merged = merge(&merged, &gi, provider)?.graph;
    }
    let mut emergent = emergent_nodes(&merged);
    let summaries: Vec<&str> = emergent.iter().map(|e| e.summary.as_str()).collect();
    let labels = categorize(&summaries, provider);
    let mut categories = BTreeMap::new();
    for (node, (cat, flagged)) in emergent.iter_mut().zip(labels) {
        node.category = Some(cat);
        node.flagged = flagged;
        *categories.entry(cat).or_insert(0) += 1;
    }
    let report = EmergenceReport {
        total: per_player.iter().map(|p| p.count).sum(),
        unique: emergent.len(),
        emergent,
        per_player,
        categories,
    };
    Ok(Analysis {
        designer: g0,
        merged,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::RuleBasedProvider;

    #[test]
    fn categorize_examples() {
        let rules = RuleBasedProvider::default();
        assert_eq!(
            categorize(&["Trick Moriarty into revealing information"], &rules),
            vec![(Category::ExtractingInformationFromNpcs, false)]
        );
        assert_eq!(
            categorize(&["Player searches for weapons at home"], &rules),
            vec![(Category::NewEntitySuggestions, false)]
        );
        assert!(categorize(&[], &rules).is_empty());
    }

    #[test]
    fn failed_categorization_is_flagged_other() {
        let dead = crate::gateway::FaultyProvider::new(crate::gateway::FaultKind::Timeout);
        assert_eq!(categorize(&["anything"], &dead), vec![(Category::Other, true)]);
    }
}
