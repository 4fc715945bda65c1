//! Graphviz DOT export of semantic graphs.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::chains::ChainSet;
use crate::semgraph::{EdgeOrigin, NodeKind, SemanticGraph};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Undirected edges walked by any chain, as `(low, high)` node pairs.
pub fn chain_edges(chains: &ChainSet) -> BTreeSet<(usize, usize)> {
    chains
        .chains
        .iter()
        .flat_map(|c| c.node_path.windows(2))
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .collect()
}

/// Nodes are filled by kind (question blue, answer green, evidence grey).
/// Edges between AMRs are dashed, chain edges pink and bold, and every edge
/// is labelled with its source facts.
pub fn to_dot(g: &SemanticGraph, chains: &ChainSet) -> String {
    let on_chain = chain_edges(chains);
    let mut out = String::from("graph semantic {\n  node [style=filled];\n");
    for (i, n) in g.nodes().iter().enumerate() {
        let color = match n.kind {
            NodeKind::Question => "lightblue",
            NodeKind::Answer => "palegreen",
            NodeKind::Evidence => "lightgrey",
        };
        writeln!(out, "  n{i} [label={}, fillcolor={color}];", quote(&n.label)).unwrap();
    }
    for e in g.edges() {
        let facts: Vec<&str> = e.facts.iter().map(|f| f.as_str()).collect();
        let mut attrs = format!("label={}", quote(&facts.join(",")));
        if e.origin == EdgeOrigin::Inter {
            attrs.push_str(", style=dashed");
        }
        if on_chain.contains(&(e.a, e.b)) {
            attrs.push_str(", color=pink, penwidth=2");
        }
        writeln!(out, "  n{} -- n{} [{attrs}];", e.a, e.b).unwrap();
    }
    out.push_str("}\n");
    out
}
