//! Graph documents: JSON (lossless) and DOT (for viewing).

use std::fmt::Write;

use super::graph::{GraphError, NarrativeGraph};

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("malformed graph document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid graph: {0}")]
    Invalid(#[from] GraphError),
}

pub fn to_json(graph: &NarrativeGraph) -> String {
    serde_json::to_string_pretty(graph).expect("graph serializes")
}

/// Parse and validate a graph document.
pub fn from_json(document: &str) -> Result<NarrativeGraph, ImportError> {
    let graph: NarrativeGraph = serde_json::from_str(document)?;
    graph.validate()?;
    Ok(graph)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT with designer nodes in blue and emergent nodes in green carrying
/// `emergent=true`.
pub fn to_dot(graph: &NarrativeGraph) -> String {
    let mut out = String::from("digraph narrative {\n  rankdir=LR;\n  node [shape=box, style=filled];\n");
    for n in &graph.nodes {
        let emergent = !n.is_designer();
        let color = if emergent { "palegreen" } else { "lightblue" };
        let _ = writeln!(
            out,
            "  {} [label=\"{}\\n{}\", fillcolor={color}, emergent={emergent}];",
            n.id,
            escape(&n.summary),
            n.state_label
        );
    }
    for (a, b) in &graph.edges {
        let _ = writeln!(out, "  {a} -> {b};");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narrative::graph::{build_path_graph, SourceKind};
    use crate::narrative::Strategy;

    fn graph(kind: SourceKind) -> NarrativeGraph {
        let s = vec![
            Strategy {
                summary: "Say \"hi\"".into(),
                state_label: "00".parse().unwrap(),
                day: 1,
                last_seq: 2,
            },
            Strategy {
                summary: "Go to park".into(),
                state_label: "01".parse().unwrap(),
                day: 1,
                last_seq: 4,
            },
        ];
        build_path_graph(&s, kind, "x").unwrap()
    }

    #[test]
    fn json_round_trip() {
        let g = graph(SourceKind::Designer);
        assert_eq!(from_json(&to_json(&g)).unwrap(), g);
    }

    #[test]
    fn malformed_documents_are_typed_errors() {
        assert!(matches!(from_json("{"), Err(ImportError::Parse(_))));
        let mut g = graph(SourceKind::Player);
        g.starts.clear();
        assert!(matches!(from_json(&to_json(&g)), Err(ImportError::Invalid(_))));
    }

    #[test]
    fn dot_marks_emergent_nodes() {
        let dot = to_dot(&graph(SourceKind::Player));
        assert_eq!(dot.matches("emergent=true").count(), 2);
        assert!(dot.contains("n0 -> n1;"));
        assert!(dot.contains("Say \\\"hi\\\""));
        assert!(to_dot(&graph(SourceKind::Designer)).contains("emergent=false"));
    }
}
