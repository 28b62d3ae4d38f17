//! Narrative graph types and path/designer/player graph construction.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::gateway::Provider;
use crate::session::{split_days, LogError, LogRecord};
use crate::world::{StateLabel, WorldSpec};

use super::distill::{distill_day, DistillError, Strategy};
use super::merge::{merge, MergeError, SummaryMatcher};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Designer,
    Player,
}

/// Where a node came from: a designer walkthrough or a player, and the day.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: SourceKind,
    pub source: String,
    pub day: u32,
}

impl Provenance {
    pub fn designer(source: impl Into<String>, day: u32) -> Self {
        Self {
            kind: SourceKind::Designer,
            source: source.into(),
            day,
        }
    }

    pub fn player(source: impl Into<String>, day: u32) -> Self {
        Self {
            kind: SourceKind::Player,
            source: source.into(),
            day,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyNode {
    pub id: NodeId,
    pub summary: String,
    pub state_label: StateLabel,
    pub provenance: BTreeSet<Provenance>,
}

impl StrategyNode {
    pub fn is_designer(&self) -> bool {
        self.provenance.iter().any(|p| p.kind == SourceKind::Designer)
    }
}

/// Directed acyclic graph of strategies. Edges follow play order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeGraph {
    pub nodes: Vec<StrategyNode>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
    pub starts: BTreeSet<NodeId>,
    pub ends: BTreeSet<NodeId>,
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("no strategies to build a graph from")]
    Empty,
    #[error("state label of strategy {index} does not extend the one before it")]
    NonMonotone { index: usize },
    #[error("no walkthroughs given")]
    NoWalkthroughs,
    #[error("edge {0} -> {1} names a missing node")]
    DanglingEdge(NodeId, NodeId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("graph has a cycle")]
    Cycle,
    #[error("node {0} is not reachable from a start node")]
    Unreachable(NodeId),
    #[error("node {0} has an empty summary or provenance")]
    EmptyNode(NodeId),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

impl NarrativeGraph {
    pub fn node(&self, id: NodeId) -> Option<&StrategyNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> Option<&mut StrategyNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn next_id(&self) -> NodeId {
        NodeId(self.nodes.iter().map(|n| n.id.0 + 1).max().unwrap_or(0))
    }

    pub fn successors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.range((id, NodeId(0))..=(id, NodeId(u32::MAX))).map(|&(_, to)| to)
    }

    pub fn predecessors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |&&(_, to)| to == id).map(|&(from, _)| from)
    }

    /// Whether `to` can be reached from `from` along edges (a node reaches
    /// itself).
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                queue.extend(self.successors(n));
            }
        }
        false
    }

    /// Kahn's order, lowest id first among ready nodes. `None` on a cycle.
    pub fn topo_order(&self) -> Option<Vec<NodeId>> {
        let mut indegree: BTreeMap<NodeId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        for &(_, to) in &self.edges {
            *indegree.get_mut(&to)? += 1;
        }
        let mut ready: BTreeSet<NodeId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for to in self.successors(n) {
                let d = indegree.get_mut(&to)?;
                *d -= 1;
                if *d == 0 {
                    ready.insert(to);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_some()
    }

    /// Nodes without designer provenance.
    pub fn emergent(&self) -> impl Iterator<Item = &StrategyNode> {
        self.nodes.iter().filter(|n| !n.is_designer())
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(GraphError::DuplicateNode(n.id));
            }
            if n.summary.trim().is_empty() || n.provenance.is_empty() {
                return Err(GraphError::EmptyNode(n.id));
            }
        }
        for &(a, b) in &self.edges {
            if !ids.contains(&a) || !ids.contains(&b) {
                return Err(GraphError::DanglingEdge(a, b));
            }
        }
        for &s in self.starts.iter().chain(&self.ends) {
            if !ids.contains(&s) {
                return Err(GraphError::DanglingEdge(s, s));
            }
        }
        if !self.is_acyclic() {
            return Err(GraphError::Cycle);
        }
        let mut reached = BTreeSet::new();
        let mut queue: VecDeque<NodeId> = self.starts.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            if reached.insert(n) {
                queue.extend(self.successors(n));
            }
        }
        if let Some(n) = self.nodes.iter().find(|n| !reached.contains(&n.id)) {
            return Err(GraphError::Unreachable(n.id));
        }
        Ok(())
    }
}

/// Chain strategies into a single path `s1 -> s2 -> ... -> sk`.
pub fn build_path_graph(strategies: &[Strategy], source: SourceKind, source_id: &str) -> Result<NarrativeGraph, GraphError> {
    if strategies.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut g = NarrativeGraph::default();
    for (i, s) in strategies.iter().enumerate() {
        if i > 0 && !s.state_label.dominates(&strategies[i - 1].state_label) {
            return Err(GraphError::NonMonotone { index: i });
        }
        let id = NodeId(i as u32);
        g.nodes.push(StrategyNode {
            id,
            summary: s.summary.clone(),
            state_label: s.state_label.clone(),
            provenance: BTreeSet::from([Provenance {
                kind: source,
                source: source_id.to_string(),
                day: s.day,
            }]),
        });
        if i > 0 {
            g.edges.insert((NodeId(i as u32 - 1), id));
        }
    }
    g.starts.insert(NodeId(0));
    g.ends.insert(NodeId(strategies.len() as u32 - 1));
    Ok(g)
}

/// Distill every day of one source's log and merge the day paths.
/// `Ok(None)` when the log holds no player commands.
fn source_graph<M: SummaryMatcher + ?Sized>(
    log: &[LogRecord],
    kind: SourceKind,
    source_id: &str,
    distiller: &dyn Provider,
    matcher: &M,
    world: &WorldSpec,
) -> Result<Option<NarrativeGraph>, GraphError> {
    let mut acc: Option<NarrativeGraph> = None;
    for day in split_days(log)? {
        let strategies = distill_day(&day, distiller, world)?;
        if strategies.is_empty() {
            continue;
        }
        let path = build_path_graph(&strategies, kind, source_id)?;
        acc = Some(match acc {
            None => path,
            Some(g) => merge(&g, &path, matcher)?.graph,
        });
    }
    Ok(acc)
}

/// One player's graph over all their days.
pub fn build_player_graph<M: SummaryMatcher + ?Sized>(
    player_id: &str,
    log: &[LogRecord],
    distiller: &dyn Provider,
    matcher: &M,
    world: &WorldSpec,
) -> Result<Option<NarrativeGraph>, GraphError> {
    source_graph(log, SourceKind::Player, player_id, distiller, matcher, world)
}

/// The designer graph: every walkthrough distilled and merged in order.
pub fn build_designer_graph<M: SummaryMatcher + ?Sized>(
    walkthroughs: &[(String, Vec<LogRecord>)],
    distiller: &dyn Provider,
    matcher: &M,
    world: &WorldSpec,
) -> Result<NarrativeGraph, GraphError> {
    let mut acc: Option<NarrativeGraph> = None;
    for (id, log) in walkthroughs {
        let Some(g) = source_graph(log, SourceKind::Designer, id, distiller, matcher, world)? else {
            continue;
        };
        acc = Some(match acc {
            None => g,
            Some(a) => merge(&a, &g, matcher)?.graph,
        });
    }
    acc.ok_or(GraphError::NoWalkthroughs)
}
