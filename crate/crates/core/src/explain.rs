//! Text rendering of reasoning chains, e.g.
//! `Question →natural-03 [3] →renew-01 [2] →solar [1] →panel (C)`.

use serde::Serialize;

use crate::chains::{ChainSet, ReasoningChain};
use crate::dot::to_dot;
use crate::semgraph::SemanticGraph;

pub const NO_CHAIN: &str = "no reasoning chain found";

/// `A`, `B`, ... for the first 26 choices, then the 1-based number.
pub fn choice_letter(idx: usize) -> String {
    if idx < 26 {
        char::from(b'A' + idx as u8).to_string()
    } else {
        (idx + 1).to_string()
    }
}

/// Each fact is preceded by the label of the path node where the chain
/// enters it: the first node, from the previous entry point on, that the fact
/// contributed. The last label is the answer node.
pub fn render_chain(chain: &ReasoningChain, g: &SemanticGraph, choice: usize) -> String {
    let path = &chain.node_path;
    let mut out = String::from("Question");
    let mut pos = 0;
    for f in &chain.facts {
        let entry = (pos..path.len())
            .find(|&i| g.node(path[i]).fact_sources().any(|s| s == f))
            .unwrap_or(pos);
        out.push_str(&format!(" →{} [{}]", g.node(path[entry]).label, f.as_str()));
        pos = entry;
    }
    if let Some(&last) = path.last() {
        out.push_str(&format!(" →{}", g.node(last).label));
    }
    out.push_str(&format!(" ({})", choice_letter(choice)));
    out
}

/// One rendered chain per line, or the sentinel when there are none.
pub fn chain_table(chains: &ChainSet, g: &SemanticGraph, choice: usize) -> String {
    if chains.is_empty() {
        return NO_CHAIN.to_string();
    }
    chains
        .chains
        .iter()
        .map(|c| render_chain(c, g, choice))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub dot: String,
    pub table: String,
}

pub fn explain(g: &SemanticGraph, chains: &ChainSet, choice: usize) -> Explanation {
    Explanation {
        dot: to_dot(g, chains),
        table: chain_table(chains, g, choice),
    }
}
