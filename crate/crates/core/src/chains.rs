//! Reasoning-chain generation: depth-first enumeration of question-to-answer
//! paths on a semantic graph, mapped to evidence-level fact sequences.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::FactId;
use crate::semgraph::{NodeKind, SemanticGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningChain {
    pub facts: Vec<FactId>,
    /// The witnessing node path, question node first.
    pub node_path: Vec<usize>,
    /// The fact each path node was read as (`None` for hypothesis-only
    /// endpoints).
    pub assignment: Vec<Option<FactId>>,
}

impl ReasoningChain {
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSet {
    pub chains: Vec<ReasoningChain>,
    pub active_facts: BTreeSet<FactId>,
}

impl ChainSet {
    pub fn from_chains(chains: Vec<ReasoningChain>) -> Self {
        let active_facts = chains.iter().flat_map(|c| c.facts.iter().cloned()).collect();
        ChainSet { chains, active_facts }
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    /// Facts in order of first appearance over the (sorted) chains, so facts
    /// on shorter chains come first.
    pub fn ordered_facts(&self) -> Vec<FactId> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.chains {
            for f in &c.facts {
                if seen.insert(f) {
                    out.push(f.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Upper bound on nodes in a path, endpoints included.
    pub max_path_len: usize,
    /// Upper bound on fact sequences read off one node path.
    pub max_expansions: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            max_path_len: 8,
            max_expansions: 4,
        }
    }
}

/// One reading of a node path as a fact sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactMapping {
    pub facts: Vec<FactId>,
    pub assignment: Vec<Option<FactId>>,
}

/// Candidate facts for each node of the path.
///
/// A node may be read as any of its evidence sources that also contributed
/// one of the path edges touching it. Interior nodes whose path edges carry
/// no fact provenance fall back to all their evidence sources; endpoints
/// without such a fact contribute nothing.
fn candidates(path: &[usize], g: &SemanticGraph) -> Vec<Vec<Option<FactId>>> {
    let last = path.len() - 1;
    path.iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut edge_facts: BTreeSet<&FactId> = BTreeSet::new();
            if i > 0 {
                if let Some(e) = g.edge(path[i - 1], v) {
                    edge_facts.extend(e.facts.iter());
                }
            }
            if i < last {
                if let Some(e) = g.edge(v, path[i + 1]) {
                    edge_facts.extend(e.facts.iter());
                }
            }
            let own: BTreeSet<&FactId> = g.node(v).fact_sources().collect();
            let both: Vec<Option<FactId>> = own
                .intersection(&edge_facts)
                .map(|f| Some((*f).clone()))
                .collect();
            if !both.is_empty() {
                both
            } else if i == 0 || i == last || own.is_empty() {
                vec![None]
            } else {
                own.into_iter().map(|f| Some(f.clone())).collect()
            }
        })
        .collect()
}

/// Every path edge contributed by some fact must be read as one of the facts
/// assigned to its endpoints.
fn covers_edges(path: &[usize], assignment: &[Option<FactId>], g: &SemanticGraph) -> bool {
    path.windows(2).zip(assignment.windows(2)).all(|(w, a)| match g.edge(w[0], w[1]) {
        Some(e) if !e.facts.is_empty() => a.iter().flatten().any(|f| e.facts.contains(f)),
        _ => true,
    })
}

fn collapse(assignment: &[Option<FactId>]) -> Option<Vec<FactId>> {
    let mut out: Vec<FactId> = Vec::new();
    for f in assignment.iter().flatten() {
        if out.last() != Some(f) {
            if out.contains(f) {
                return None;
            }
            out.push(f.clone());
        }
    }
    (!out.is_empty()).then_some(out)
}

/// Maps a node path to fact sequences.
///
/// Every combination of per-node candidate facts that accounts for each
/// fact-derived path edge is read off; consecutive
/// repeats collapse, and combinations revisiting a fact after leaving it are
/// discarded. The distinct sequences are ordered by (length, fact ids) and
/// at most `cap` are returned, each with its first witnessing assignment.
pub fn map_to_facts(path: &[usize], g: &SemanticGraph, cap: usize) -> Vec<FactMapping> {
    if path.is_empty() || cap == 0 {
        return Vec::new();
    }
    let cands = candidates(path, g);
    let mut found: BTreeMap<(usize, Vec<FactId>), Vec<Option<FactId>>> = BTreeMap::new();
    let mut idx = vec![0usize; cands.len()];
    loop {
        let assignment: Vec<Option<FactId>> =
            idx.iter().zip(&cands).map(|(&i, c)| c[i].clone()).collect();
        if let Some(facts) = collapse(&assignment).filter(|_| covers_edges(path, &assignment, g)) {
            found.entry((facts.len(), facts)).or_insert(assignment);
        }
        // odometer increment, last position fastest
        let mut pos = cands.len();
        loop {
            if pos == 0 {
                return found
                    .into_iter()
                    .take(cap)
                    .map(|((_, facts), assignment)| FactMapping { facts, assignment })
                    .collect();
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < cands[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Enumerates every simple path that starts at a question node, passes
/// through one or more evidence nodes and ends at an answer node, and maps
/// each to fact sequences. Chains are deduplicated by fact sequence (first
/// witness kept) and sorted by (length, fact ids).
pub fn generate_chains(g: &SemanticGraph, cfg: &ChainConfig) -> ChainSet {
    let mut found: HashMap<Vec<FactId>, ReasoningChain> = HashMap::new();
    let mut path = Vec::new();
    let mut on_path = vec![false; g.nodes().len()];
    for &q in g.qnodes() {
        path.push(q);
        on_path[q] = true;
        dfs(g, cfg, &mut path, &mut on_path, &mut found);
        on_path[q] = false;
        path.pop();
    }
    let mut chains: Vec<ReasoningChain> = found.into_values().collect();
    chains.sort_by(|a, b| (a.facts.len(), &a.facts).cmp(&(b.facts.len(), &b.facts)));
    ChainSet::from_chains(chains)
}

fn dfs(
    g: &SemanticGraph,
    cfg: &ChainConfig,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    found: &mut HashMap<Vec<FactId>, ReasoningChain>,
) {
    let here = *path.last().expect("non-empty path");
    if path.len() >= cfg.max_path_len {
        return;
    }
    for &next in g.neighbors(here) {
        if on_path[next] {
            continue;
        }
        match g.node(next).kind {
            NodeKind::Question => {}
            NodeKind::Answer => {
                if path.len() >= 2 {
                    path.push(next);
                    for m in map_to_facts(path, g, cfg.max_expansions) {
                        found.entry(m.facts.clone()).or_insert_with(|| ReasoningChain {
                            facts: m.facts,
                            node_path: path.clone(),
                            assignment: m.assignment,
                        });
                    }
                    path.pop();
                }
            }
            NodeKind::Evidence => {
                path.push(next);
                on_path[next] = true;
                dfs(g, cfg, path, on_path, found);
                on_path[next] = false;
                path.pop();
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub counts: BTreeMap<usize, usize>,
    /// Most frequent chain length (smaller wins ties); 0 for an empty set.
    pub modal_length: usize,
}

pub fn chain_length_histogram(cs: &ChainSet) -> LengthHistogram {
    let mut counts = BTreeMap::new();
    for c in &cs.chains {
        *counts.entry(c.facts.len()).or_insert(0) += 1;
    }
    let modal_length = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&len, _)| len)
        .unwrap_or(0);
    LengthHistogram {
        counts,
        modal_length,
    }
}
