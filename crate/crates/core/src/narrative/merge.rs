//! Incremental graph merge with an audit trail of every match decision.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::gateway::{Evaluator, Provider, ProviderError};
use crate::world::StateLabel;

use super::graph::{NarrativeGraph, NodeId, StrategyNode};

/// Decides whether two summaries describe the same strategy.
pub trait SummaryMatcher {
    fn same(&self, a: &str, b: &str) -> Result<bool, ProviderError>;
    fn evaluator(&self) -> Evaluator;
}

impl<P: Provider + ?Sized> SummaryMatcher for P {
    fn same(&self, a: &str, b: &str) -> Result<bool, ProviderError> {
        self.match_summaries(a, b)
    }

    fn evaluator(&self) -> Evaluator {
        Provider::evaluator(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Same,
    Different,
}

/// One candidate comparison made during a merge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMatch {
    /// Node of the incoming graph.
    pub incoming: NodeId,
    /// Node of the accumulated graph.
    pub candidate: NodeId,
    pub incoming_label: StateLabel,
    pub candidate_label: StateLabel,
    pub verdict: Verdict,
    pub evaluator: Evaluator,
    /// Set when the pair matched but unifying would have closed a cycle.
    #[serde(default)]
    pub cycle: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergeOutcome {
    pub graph: NarrativeGraph,
    pub audit: Vec<NodeMatch>,
    /// Where each incoming node ended up.
    pub resolved: BTreeMap<NodeId, NodeId>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("matcher failed: {0}")]
    Matcher(#[from] ProviderError),
    #[error("{0} graph has a cycle")]
    Cyclic(&'static str),
}

/// Candidate preference: identical summary, then identical provenance, then
/// lowest id.
pub(crate) fn rank_candidates<'a>(acc: &'a NarrativeGraph, node: &StrategyNode) -> Vec<&'a StrategyNode> {
    let mut c: Vec<&StrategyNode> = acc.nodes.iter().filter(|c| c.state_label == node.state_label).collect();
    c.sort_by_key(|c| (c.summary != node.summary, c.provenance != node.provenance, c.id));
    c
}

/// Merge `incoming` into `accumulated`. Incoming nodes are visited in
/// topological order; each unifies with the first equal-label candidate the
/// matcher accepts, is not already claimed by another incoming node, and
/// does not close a cycle. Otherwise it is inserted as a new node.
pub fn merge<M: SummaryMatcher + ?Sized>(
    accumulated: &NarrativeGraph,
    incoming: &NarrativeGraph,
    matcher: &M,
) -> Result<MergeOutcome, MergeError> {
    if !accumulated.is_acyclic() {
        return Err(MergeError::Cyclic("accumulated"));
    }
    let order = incoming.topo_order().ok_or(MergeError::Cyclic("incoming"))?;
    let mut out = accumulated.clone();
    let mut audit = Vec::new();
    let mut claimed = BTreeSet::new();
    let mut resolved: BTreeMap<NodeId, NodeId> = BTreeMap::new();

    for v in order {
        let node = incoming.node(v).expect("topo order lists existing nodes");
        let preds: Vec<NodeId> = incoming.predecessors(v).map(|p| resolved[&p]).collect();
        let mut chosen = None;
        for cand in rank_candidates(accumulated, node) {
            if claimed.contains(&cand.id) {
                continue;
            }
            let same = cand.summary == node.summary || matcher.same(&cand.summary, &node.summary)?;
            let cycle = same && preds.iter().any(|&p| out.reaches(cand.id, p));
            audit.push(NodeMatch {
                incoming: v,
                candidate: cand.id,
                incoming_label: node.state_label.clone(),
                candidate_label: cand.state_label.clone(),
                verdict: if same { Verdict::Same } else { Verdict::Different },
                evaluator: matcher.evaluator(),
                cycle,
            });
            if same && !cycle {
                chosen = Some(cand.id);
                break;
            }
        }
        let target = match chosen {
            Some(c) => {
                claimed.insert(c);
                let merged = out.node_mut(c).expect("candidate exists");
                merged.provenance.extend(node.provenance.iter().cloned());
                c
            }
            None => {
                let id = out.next_id();
                out.nodes.push(StrategyNode { id, ..node.clone() });
                id
            }
        };
        resolved.insert(v, target);
        for p in preds {
            out.edges.insert((p, target));
        }
    }
    out.starts.extend(incoming.starts.iter().map(|s| resolved[s]));
    out.ends.extend(incoming.ends.iter().map(|s| resolved[s]));
    debug_assert!(out.is_acyclic());
    Ok(MergeOutcome {
        graph: out,
        audit,
        resolved,
    })
}
