//! Random small graphs and a brute-force merge used as the oracle for
//! `narrative::merge`.

use std::collections::{BTreeMap, BTreeSet};

use dejaboom_core::narrative::{merge, NarrativeGraph, NodeId, Provenance, StrategyNode, SummaryMatcher};
use dejaboom_core::StateLabel;
use proptest::prelude::*;

/// Includes synonym pairs the rule matcher unifies.
pub const SUMMARIES: [&str; 6] = [
    "Ask Mrs. Thompson about the explosion",
    "Question Mrs. Thompson regarding the bomb",
    "Tell the Mad Hatter a joke",
    "Take water bucket at home",
    "Search for weapons at home",
    "Hide and wait in the park",
];

pub const LABELS: [&str; 3] = ["0011", "0111", "1111"];

/// A DAG of `1..=max_nodes` nodes. Edges only go from lower to higher
/// index, so the result is acyclic by construction.
pub fn arb_graph(designer: bool, source: &'static str, max_nodes: usize) -> impl Strategy<Value = NarrativeGraph> {
    (1..=max_nodes)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0..SUMMARIES.len(), 0..LABELS.len(), 1u32..=2), n),
                prop::collection::vec(prop::bool::weighted(0.35), n * (n - 1) / 2),
            )
        })
        .prop_map(move |(nodes, edge_bits)| {
            let nodes: Vec<StrategyNode> = nodes
                .into_iter()
                .enumerate()
                .map(|(i, (s, l, day))| StrategyNode {
                    id: NodeId(i as u32),
                    summary: SUMMARIES[s].to_string(),
                    state_label: LABELS[l].parse().unwrap(),
                    provenance: BTreeSet::from([if designer {
                        Provenance::designer(source, day)
                    } else {
                        Provenance::player(source, day)
                    }]),
                })
                .collect();
            let n = nodes.len();
            let mut edges = BTreeSet::new();
            let mut bits = edge_bits.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    if bits.next().unwrap() {
                        edges.insert((NodeId(i as u32), NodeId(j as u32)));
                    }
                }
            }
            let has_pred: BTreeSet<NodeId> = edges.iter().map(|&(_, b)| b).collect();
            let has_succ: BTreeSet<NodeId> = edges.iter().map(|&(a, _)| a).collect();
            NarrativeGraph {
                starts: nodes.iter().map(|n| n.id).filter(|id| !has_pred.contains(id)).collect(),
                ends: nodes.iter().map(|n| n.id).filter(|id| !has_succ.contains(id)).collect(),
                nodes,
                edges,
            }
        })
}

/// Designer graph and player graph, at most 12 nodes together.
pub fn arb_pair() -> impl Strategy<Value = (NarrativeGraph, NarrativeGraph)> {
    (arb_graph(true, "designer", 6), arb_graph(false, "player", 6))
}

fn kahn(g: &NarrativeGraph) -> Option<Vec<NodeId>> {
    let mut indeg: BTreeMap<NodeId, usize> = g.nodes.iter().map(|n| (n.id, 0)).collect();
    for (_, b) in &g.edges {
        *indeg.get_mut(b)? += 1;
    }
    let mut order = Vec::new();
    while let Some(next) = indeg.iter().find(|(_, &d)| d == 0).map(|(&n, _)| n) {
        indeg.remove(&next);
        order.push(next);
        for (a, b) in &g.edges {
            if *a == next {
                *indeg.get_mut(b)? -= 1;
            }
        }
    }
    (order.len() == g.nodes.len()).then_some(order)
}

fn has_cycle(nodes: &[NodeId], edges: &BTreeSet<(NodeId, NodeId)>) -> bool {
    fn visit(n: NodeId, edges: &BTreeSet<(NodeId, NodeId)>, state: &mut BTreeMap<NodeId, u8>) -> bool {
        match state.get(&n) {
            Some(1) => return true,
            Some(2) => return false,
            _ => {}
        }
        state.insert(n, 1);
        for &(_, b) in edges.iter().filter(|(a, _)| *a == n) {
            if visit(b, edges, state) {
                return true;
            }
        }
        state.insert(n, 2);
        false
    }
    let mut state = BTreeMap::new();
    nodes.iter().any(|&n| visit(n, edges, &mut state))
}

/// Materialize the merged graph for a complete assignment (`None` = new
/// node). Returns `None` if the result is cyclic.
fn realize(acc: &NarrativeGraph, inc: &NarrativeGraph, order: &[NodeId], pick: &[Option<NodeId>]) -> Option<NarrativeGraph> {
    let mut out = acc.clone();
    let mut resolved = BTreeMap::new();
    for (&v, &choice) in order.iter().zip(pick) {
        let node = inc.nodes.iter().find(|n| n.id == v).unwrap();
        let target = match choice {
            Some(c) => {
                let n = out.nodes.iter_mut().find(|n| n.id == c).unwrap();
                n.provenance.extend(node.provenance.iter().cloned());
                c
            }
            None => {
                let id = NodeId(out.nodes.iter().map(|n| n.id.0 + 1).max().unwrap_or(0));
                out.nodes.push(StrategyNode { id, ..node.clone() });
                id
            }
        };
        resolved.insert(v, target);
    }
    for &(a, b) in &inc.edges {
        out.edges.insert((resolved[&a], resolved[&b]));
    }
    out.starts.extend(inc.starts.iter().map(|s| resolved[s]));
    out.ends.extend(inc.ends.iter().map(|s| resolved[s]));
    let ids: Vec<NodeId> = out.nodes.iter().map(|n| n.id).collect();
    (!has_cycle(&ids, &out.edges)).then_some(out)
}

/// Try every label-respecting, matcher-approved, injective unification set
/// and keep the best acyclic one. "Best" compares the per-node choice
/// ranks lexicographically in visiting order; a new node ranks last.
pub fn brute_force_merge<M: SummaryMatcher + ?Sized>(acc: &NarrativeGraph, inc: &NarrativeGraph, matcher: &M) -> NarrativeGraph {
    let order = kahn(inc).expect("incoming graph is acyclic");
    let options: Vec<Vec<Option<NodeId>>> = order
        .iter()
        .map(|&v| {
            let node = inc.nodes.iter().find(|n| n.id == v).unwrap();
            let mut cands: Vec<&StrategyNode> = acc
                .nodes
                .iter()
                .filter(|c| c.state_label == node.state_label)
                .filter(|c| c.summary == node.summary || matcher.same(&c.summary, &node.summary).unwrap())
                .collect();
            cands.sort_by_key(|c| (c.summary != node.summary, c.provenance != node.provenance, c.id));
            cands.into_iter().map(|c| Some(c.id)).chain([None]).collect()
        })
        .collect();

    // Odometer over the option lists; the first valid assignment in
    // lexicographic order is the minimum.
    let mut idx = vec![0usize; order.len()];
    loop {
        let pick: Vec<Option<NodeId>> = idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
        let used: Vec<NodeId> = pick.iter().flatten().copied().collect();
        let injective = used.iter().collect::<BTreeSet<_>>().len() == used.len();
        if injective {
            if let Some(g) = realize(acc, inc, &order, &pick) {
                return g;
            }
        }
        let mut k = order.len();
        loop {
            if k == 0 {
                unreachable!("all-new assignment is always valid");
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// `None` when every merge property holds, else a description of the first
/// violation.
pub fn merge_property_violation<M: SummaryMatcher + ?Sized>(
    g0: &NarrativeGraph,
    gi: &NarrativeGraph,
    matcher: &M,
) -> Option<String> {
    // idempotence on each input
    for g in [g0, gi] {
        let same = merge(g, g, matcher).unwrap();
        if !isomorphic_via(g, &same.graph, &same.resolved) {
            return Some(format!("merge(g, g) is not g for {g:?}"));
        }
    }
    let out = merge(g0, gi, matcher).unwrap();
    if !out.graph.is_acyclic() {
        return Some("merged graph has a cycle".into());
    }
    if let Err(e) = out.graph.validate() {
        return Some(format!("merged graph invalid: {e}"));
    }
    for d in &g0.nodes {
        let Some(m) = out.graph.node(d.id) else {
            return Some(format!("designer node {} lost", d.id));
        };
        if m.summary != d.summary || m.state_label != d.state_label || !m.provenance.is_superset(&d.provenance) {
            return Some(format!("designer node {} altered", d.id));
        }
    }
    for m in &out.audit {
        if m.incoming_label != m.candidate_label {
            return Some(format!("audit compared unequal labels: {m:?}"));
        }
    }
    for (v, t) in &out.resolved {
        let a = &gi.node(*v).unwrap().state_label;
        let b: &StateLabel = &out.graph.node(*t).unwrap().state_label;
        if a != b {
            return Some(format!("{v} unified with {t} across labels"));
        }
    }
    let oracle = brute_force_merge(g0, gi, matcher);
    if oracle != out.graph {
        return Some(format!("oracle disagrees\nmerge:  {:?}\noracle: {oracle:?}", out.graph));
    }
    None
}

/// `resolved` is a bijection onto `h` that carries `g`'s nodes, edges,
/// starts and ends exactly.
fn isomorphic_via(g: &NarrativeGraph, h: &NarrativeGraph, resolved: &BTreeMap<NodeId, NodeId>) -> bool {
    let image: BTreeSet<NodeId> = resolved.values().copied().collect();
    if g.nodes.len() != h.nodes.len() || image.len() != g.nodes.len() {
        return false;
    }
    let nodes_ok = g.nodes.iter().all(|n| {
        h.node(resolved[&n.id])
            .is_some_and(|m| m.summary == n.summary && m.state_label == n.state_label && m.provenance == n.provenance)
    });
    let map = |s: &BTreeSet<NodeId>| s.iter().map(|x| resolved[x]).collect::<BTreeSet<_>>();
    nodes_ok
        && g.edges.iter().map(|(a, b)| (resolved[a], resolved[b])).collect::<BTreeSet<_>>() == h.edges
        && map(&g.starts) == h.starts
        && map(&g.ends) == h.ends
}
